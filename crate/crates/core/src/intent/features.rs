use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, GoalSet, PlanarPose, PlanarTwist, PlanarWrench};

/// Goals the feature layout is defined for.
pub const GOAL_COUNT: usize = 3;
/// Three projections per goal, stretch wrench (3), human force magnitude (1).
pub const FEATURE_DIM: usize = 3 * GOAL_COUNT + 4;
/// Bumped whenever the feature layout changes.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

/// Human-side observation at one intent tick.
///
/// Layout: for goal i in 0..3, `[3i] = F_H·d_i` (N), `[3i+1] = (F_H·d_i)(v·d_i)` (W),
/// `[3i+2] = v·d_i` (m/s); then the stretch wrench `F_H − F_act` in the
/// object frame (`[9]` fx, `[10]` fy, `[11]` tau) and `[12] = ‖F_H‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn projected_force(&self, goal: usize) -> f64 {
        self.0[3 * goal]
    }

    pub fn projected_power(&self, goal: usize) -> f64 {
        self.0[3 * goal + 1]
    }

    pub fn projected_velocity(&self, goal: usize) -> f64 {
        self.0[3 * goal + 2]
    }

    pub fn stretch(&self) -> PlanarWrench {
        PlanarWrench::new(self.0[9], self.0[10], self.0[11])
    }

    pub fn human_force_magnitude(&self) -> f64 {
        self.0[12]
    }
}

impl TryFrom<&[f64]> for FeatureVector {
    type Error = Error;
    fn try_from(v: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_DIM] =
            v.try_into().map_err(|_| Error::Format(format!("expected {FEATURE_DIM} features, got {}", v.len())))?;
        if arr.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("non-finite feature".into()));
        }
        Ok(Self(arr))
    }
}

/// Either an idle observation (human force below threshold) or features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Idle,
    Active(FeatureVector),
}

/// Builds the feature vector for one instant. A goal the pose coincides with
/// contributes zero projections.
pub fn extract_features(
    pose: &PlanarPose,
    twist: &PlanarTwist,
    f_human: &PlanarWrench,
    f_robot_act: &PlanarWrench,
    goals: &GoalSet,
    idle_threshold: f64,
) -> Result<Observation> {
    if goals.len() != GOAL_COUNT {
        return Err(Error::Config(format!("features are defined for {GOAL_COUNT} goals, got {}", goals.len())));
    }
    let magnitude = f_human.magnitude();
    if magnitude < idle_threshold {
        return Ok(Observation::Idle);
    }
    let force = f_human.force();
    let velocity = twist.linear();
    let mut out = [0.0; FEATURE_DIM];
    for i in 0..GOAL_COUNT {
        if let Ok(d) = goals.direction_to(pose, i) {
            let f = project(force, d);
            let v = project(velocity, d);
            out[3 * i] = f;
            out[3 * i + 1] = f * v;
            out[3 * i + 2] = v;
        }
    }
    let stretch = (*f_human - *f_robot_act).to_body_frame(pose.theta);
    out[9] = stretch.fx;
    out[10] = stretch.fy;
    out[11] = stretch.tau;
    out[12] = magnitude;
    Ok(Observation::Active(FeatureVector(out)))
}
