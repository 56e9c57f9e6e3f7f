//! Admittance layer and the simulated tray it drives.
//!
//! The admittance law is solved per axis in implicit form:
//! `accel = (m + dt·b)⁻¹ · (f_act + f_sensor − b·v_prev)`, `v = v_prev + dt·accel`,
//! followed by a saturation of the commanded twist.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, GoalSet, PlanarAccel, PlanarPose, PlanarTwist, PlanarWrench};

/// Diagonal virtual inertia/damping plus velocity limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmittanceParams {
    /// Translational virtual mass, kg (applied to x and y).
    pub m_lin: f64,
    /// Rotational virtual inertia, kg·m².
    pub m_rot: f64,
    /// Translational damping, N·s/m.
    pub b_lin: f64,
    /// Rotational damping, N·m·s.
    pub b_rot: f64,
    pub dt: f64,
    pub v_max_lin: f64,
    pub v_max_rot: f64,
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        Self { m_lin: 8.0, m_rot: 0.5, b_lin: 25.0, b_rot: 2.0, dt: 0.002, v_max_lin: 0.5, v_max_rot: 1.0 }
    }
}

impl AdmittanceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.m_lin, self.m_rot, self.b_lin, self.b_rot, self.dt, self.v_max_lin, self.v_max_rot];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("admittance parameters must be positive and finite: {self:?}")))
        }
    }
}

/// One admittance update. Linear velocity is clamped per component to
/// `v_max_lin`, angular velocity to `v_max_rot`.
pub fn admittance_step(
    twist_prev: PlanarTwist,
    f_act: PlanarWrench,
    f_sensor: PlanarWrench,
    p: &AdmittanceParams,
) -> (PlanarTwist, PlanarAccel) {
    let f = f_act + f_sensor;
    let axis = |m: f64, b: f64, force: f64, v_prev: f64| (force - b * v_prev) / (m + p.dt * b);
    let accel = PlanarAccel {
        ax: axis(p.m_lin, p.b_lin, f.fx, twist_prev.vx),
        ay: axis(p.m_lin, p.b_lin, f.fy, twist_prev.vy),
        alphaz: axis(p.m_rot, p.b_rot, f.tau, twist_prev.wz),
    };
    let twist = PlanarTwist {
        vx: (twist_prev.vx + p.dt * accel.ax).clamp(-p.v_max_lin, p.v_max_lin),
        vy: (twist_prev.vy + p.dt * accel.ay).clamp(-p.v_max_lin, p.v_max_lin),
        wz: (twist_prev.wz + p.dt * accel.alphaz).clamp(-p.v_max_rot, p.v_max_rot),
    };
    (twist, accel)
}

/// Kinematic state of the simulated tray.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub pose: PlanarPose,
    pub twist: PlanarTwist,
    pub t: f64,
}

impl PlantState {
    pub fn at_rest(pose: PlanarPose) -> Self {
        Self { pose, twist: PlanarTwist::ZERO, t: 0.0 }
    }
}

/// Integrates the commanded world-frame twist with explicit Euler.
pub fn plant_step(state: &PlantState, twist: PlanarTwist, dt: f64) -> PlantState {
    debug_assert!(dt > 0.0);
    let pose = PlanarPose {
        x: state.pose.x + twist.vx * dt,
        y: state.pose.y + twist.vy * dt,
        theta: normalize_angle(state.pose.theta + twist.wz * dt),
    };
    PlantState { pose, twist, t: state.t + dt }
}

/// Index of the first goal within the arrival tolerance (lowest index wins ties).
pub fn goal_check(pose: &PlanarPose, goals: &GoalSet) -> Option<usize> {
    goals.sites().iter().position(|g| pose.distance(g) <= goals.reach_tolerance())
}

/// Owns the tray state and advances it one control tick at a time.
///
/// Once halted the commanded twist is zero, the way the robot's low-level
/// controller stops the tray after a goal is reached or a trial ends.
#[derive(Debug, Clone)]
pub struct AdmittanceStepper {
    params: AdmittanceParams,
    state: PlantState,
    halted: bool,
}

impl AdmittanceStepper {
    pub fn new(params: AdmittanceParams, start: PlanarPose) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, state: PlantState::at_rest(start), halted: false })
    }

    pub fn params(&self) -> &AdmittanceParams {
        &self.params
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn halt(&mut self) {
        self.halted = true;
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn step(&mut self, f_act: PlanarWrench, f_sensor: PlanarWrench) -> PlanarAccel {
        let (twist, accel) = if self.halted {
            (PlanarTwist::ZERO, PlanarAccel::default())
        } else {
            admittance_step(self.state.twist, f_act, f_sensor, &self.params)
        };
        self.state = plant_step(&self.state, twist, self.params.dt);
        accel
    }
}
