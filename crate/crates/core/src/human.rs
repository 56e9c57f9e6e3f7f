//! Scripted human partners that close the loop in simulation.
//!
//! * Follower: waits for the tray to move, then pushes along its velocity.
//! * Hard: pushes toward its goal, resists being dragged sideways and
//!   escalates toward `force_cap` while it perceives the robot pulling
//!   elsewhere. Eases off close to the goal. Never gives up.
//! * Soft: as Hard, but only escalates after `escalation_delay` of conflict,
//!   and yields once the stretch force stays above `yield_stretch` for
//!   `yield_hold`, then follows the robot's apparent goal.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Commitment, GoalAssignment, GoalSet, PlanarPose, PlanarTwist, PlanarWrench, Vec2};

pub use crate::harness::generate_training_trials;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanParams {
    pub commitment: Commitment,
    pub goal_index: Option<usize>,
    /// Delay before the human reacts to the start cue or to robot motion, s.
    pub reaction_delay: f64,
    /// Force the human escalates to under sustained conflict, N.
    pub force_cap: f64,
    /// Force applied along the goal direction when nothing resists, N.
    pub nominal_force: f64,
    /// First-order time constant of the applied force, s.
    pub buildup_tau: f64,
    /// How long conflict must last before the human starts escalating, s.
    pub escalation_delay: f64,
    /// Time constant of escalation toward `force_cap` during conflict, s.
    pub escalation_tau: f64,
    /// Robot force across or against the human's direction that reads as
    /// conflict, N.
    pub conflict_force: f64,
    /// Push-back against sideways tray motion, N·s/m.
    pub lateral_gain: f64,
    /// Distance from the target inside which the human eases off, m.
    pub approach_radius: f64,
    pub yield_stretch: f64,
    pub yield_hold: f64,
    /// Per-axis standard deviation of additive force noise, N.
    pub noise_std: f64,
    /// Probability of heading for the wrong site at trial start.
    pub swap_error_prob: f64,
    /// Constant angular offset of the pushing direction, rad.
    pub heading_bias: f64,
    /// Tray speed a follower must feel before it engages, m/s.
    pub follow_speed: f64,
}

impl HumanParams {
    pub fn defaults_for(commitment: Commitment) -> Self {
        Self {
            commitment,
            goal_index: None,
            reaction_delay: 0.25,
            force_cap: if commitment == Commitment::Hard { 35.0 } else { 20.0 },
            nominal_force: 8.0,
            buildup_tau: 0.3,
            escalation_delay: if commitment == Commitment::Soft { 2.5 } else { 0.0 },
            escalation_tau: if commitment == Commitment::Hard { 0.8 } else { 2.0 },
            conflict_force: 2.0,
            lateral_gain: 10.0,
            approach_radius: 0.1,
            yield_stretch: 18.0,
            yield_hold: 1.0,
            noise_std: 0.5,
            swap_error_prob: 0.0,
            heading_bias: 0.0,
            follow_speed: 0.05,
        }
    }

    pub fn with_assignment(mut self, a: GoalAssignment) -> Self {
        self.commitment = a.commitment();
        self.goal_index = a.goal_index();
        self
    }

    pub fn validate(&self, robot_f_max: f64) -> Result<()> {
        if !(self.force_cap > 0.0)
            || self.reaction_delay < 0.0
            || !(self.buildup_tau > 0.0)
            || !(self.escalation_tau > 0.0)
            || self.escalation_delay < 0.0
            || !(self.approach_radius > 0.0)
        {
            return Err(Error::Config("human force cap and time constants must be positive".into()));
        }
        if self.yield_stretch >= self.force_cap + robot_f_max {
            return Err(Error::Config("yield stretch is unreachable with these force limits".into()));
        }
        if !(0.0..=1.0).contains(&self.swap_error_prob) || self.noise_std < 0.0 || self.lateral_gain < 0.0 {
            return Err(Error::Config("invalid human noise, gain or swap probability".into()));
        }
        if (self.commitment == Commitment::Follower) != self.goal_index.is_none() {
            return Err(Error::Config("human goal must be set exactly when not a follower".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanState {
    pub current_target: Option<usize>,
    /// Applied wrench including noise.
    pub f_applied: PlanarWrench,
    /// Noise-free applied force.
    pub f_clean: Vec2,
    pub yielded: bool,
    /// Continuous time the human has perceived conflict, s.
    pub conflict_clock: f64,
    /// Continuous time stretch has exceeded the yield level, s.
    pub stretch_clock: f64,
    /// Continuous time the tray has been moving (followers), s.
    pub motion_clock: f64,
    pub engaged: bool,
    /// Current effort along the goal direction, N.
    pub effort: f64,
    pub t: f64,
}

impl HumanState {
    /// Fresh state; may pick a wrong site with the swap-error probability.
    pub fn new<R: Rng + ?Sized>(params: &HumanParams, goals: &GoalSet, rng: &mut R) -> Self {
        let mut target = params.goal_index;
        if let Some(g) = target {
            if params.swap_error_prob > 0.0 && rng.random::<f64>() < params.swap_error_prob && goals.len() > 1 {
                let other = rng.random_range(0..goals.len() - 1);
                target = Some(if other >= g { other + 1 } else { other });
            }
        }
        Self {
            current_target: target,
            f_applied: PlanarWrench::ZERO,
            f_clean: Vec2::ZERO,
            yielded: false,
            conflict_clock: 0.0,
            stretch_clock: 0.0,
            motion_clock: 0.0,
            engaged: false,
            effort: 0.0,
            t: 0.0,
        }
    }
}

/// Goal whose direction from `pose` best matches `force`.
pub fn apparent_goal(pose: &PlanarPose, force: Vec2, goals: &GoalSet) -> Option<usize> {
    let dir = force.normalized()?;
    (0..goals.len())
        .filter_map(|i| goals.direction_to(pose, i).ok().map(|d| (i, d.dot(dir))))
        .fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((i, c)),
        })
        .map(|(i, _)| i)
}

/// One step of the scripted human. Returns the applied (noisy) wrench; the
/// state keeps the same value in `f_applied`.
#[allow(clippy::too_many_arguments)]
pub fn human_step<R: Rng + ?Sized>(
    params: &HumanParams,
    state: &mut HumanState,
    pose: &PlanarPose,
    twist: &PlanarTwist,
    f_robot_act: &PlanarWrench,
    goals: &GoalSet,
    dt: f64,
    rng: &mut R,
) -> PlanarWrench {
    debug_assert!(dt > 0.0);
    state.t += dt;
    let desired = if params.commitment == Commitment::Follower {
        follow(params, state, twist, dt)
    } else if state.t < params.reaction_delay {
        Vec2::ZERO
    } else {
        pursue(params, state, pose, twist, f_robot_act, goals, dt)
    };
    // Magnitude builds up with the time constant; direction follows at once.
    let mag = state.f_clean.norm();
    let mag = mag + (desired.norm() - mag) * (dt / params.buildup_tau).min(1.0);
    state.f_clean = match desired.normalized().or_else(|| state.f_clean.normalized()) {
        Some(d) => d * mag,
        None => Vec2::ZERO,
    };
    let noise = if params.noise_std > 0.0 && state.f_clean.norm() > 0.0 {
        let n = Normal::new(0.0, params.noise_std).expect("finite noise");
        let raw = Vec2::new(n.sample(rng), n.sample(rng));
        let cap = 3.0 * params.noise_std;
        let norm = raw.norm();
        if norm > cap {
            raw * (cap / norm)
        } else {
            raw
        }
    } else {
        Vec2::ZERO
    };
    state.f_applied = PlanarWrench::from_force(state.f_clean + noise);
    state.f_applied
}

/// Goal-directed behaviour of Hard and Soft humans.
fn pursue(
    params: &HumanParams,
    state: &mut HumanState,
    pose: &PlanarPose,
    twist: &PlanarTwist,
    f_robot_act: &PlanarWrench,
    goals: &GoalSet,
    dt: f64,
) -> Vec2 {
    let Some(target) = state.current_target else { return Vec2::ZERO };
    let Ok(dir) = goals.direction_to(pose, target) else { return Vec2::ZERO };
    let dir = dir.rotated(params.heading_bias);
    let robot = f_robot_act.force();

    let along = robot.dot(dir);
    let across = (robot - dir * along).norm();
    let conflict = !state.yielded && (across > params.conflict_force || along < -params.conflict_force);
    state.conflict_clock = if conflict { state.conflict_clock + dt } else { 0.0 };

    if params.commitment == Commitment::Soft && !state.yielded {
        let stretch = (state.f_clean - robot).norm();
        state.stretch_clock = if stretch > params.yield_stretch { state.stretch_clock + dt } else { 0.0 };
        if state.stretch_clock >= params.yield_hold {
            state.yielded = true;
            state.conflict_clock = 0.0;
            if let Some(g) = apparent_goal(pose, robot, goals) {
                state.current_target = Some(g);
            }
            return Vec2::ZERO;
        }
    }

    let (goal_effort, tau) = if state.conflict_clock > params.escalation_delay {
        (params.force_cap, params.escalation_tau)
    } else {
        (params.nominal_force, params.buildup_tau)
    };
    if state.effort < params.nominal_force {
        state.effort = params.nominal_force;
    }
    state.effort += (goal_effort - state.effort) * (dt / tau).min(1.0);

    let dist = goals.site(target).map_or(0.0, |s| pose.distance(s));
    let ease = (dist / params.approach_radius).clamp(0.3, 1.0);
    let v = twist.linear();
    let v_side = v - dir * v.dot(dir);
    let f = dir * (state.effort * ease) - v_side * params.lateral_gain;
    let n = f.norm();
    if n > params.force_cap {
        f * (params.force_cap / n)
    } else {
        f
    }
}

/// Follower behaviour: engage after the tray has moved for the reaction
/// delay, then push along the tray velocity.
fn follow(params: &HumanParams, state: &mut HumanState, twist: &PlanarTwist, dt: f64) -> Vec2 {
    let v = twist.linear();
    let dir = v.normalized();
    if v.norm() > params.follow_speed {
        state.motion_clock += dt;
        if state.motion_clock >= params.reaction_delay {
            state.engaged = true;
        }
    } else {
        state.motion_clock = 0.0;
    }
    match dir {
        Some(d) if state.engaged => d * params.nominal_force,
        _ => Vec2::ZERO,
    }
}
