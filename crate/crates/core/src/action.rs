//! Robot action force: first-order transient toward a clipped reference, and
//! the stochastic choice of reference magnitude.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PlanarWrench, Vec2};

/// Which controller is asking for a force magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerRole {
    Hard,
    Soft,
    Kcg,
}

/// Strength level of a sampled reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthLevel {
    Weak,
    Medium,
    Strong,
}

impl StrengthLevel {
    const ALL: [StrengthLevel; 3] = [StrengthLevel::Weak, StrengthLevel::Medium, StrengthLevel::Strong];

    fn index(self) -> usize {
        self as usize
    }
}

/// Action-force shaping state, updated at the control rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionForceState {
    pub f_act: PlanarWrench,
    pub f_ref: PlanarWrench,
    pub t_transient: f64,
}

impl Default for ActionForceState {
    fn default() -> Self {
        Self { f_act: PlanarWrench::ZERO, f_ref: PlanarWrench::ZERO, t_transient: 0.2 }
    }
}

impl ActionForceState {
    pub fn new(t_transient: f64) -> Self {
        Self { t_transient, ..Self::default() }
    }

    /// `f_act ← f_act + (f_ref − f_act)·dt/t_transient`, or zero at a goal site.
    pub fn step(&mut self, dt: f64, at_goal: bool) -> PlanarWrench {
        debug_assert!(dt > 0.0 && dt < self.t_transient);
        self.f_act = if at_goal {
            PlanarWrench::ZERO
        } else {
            let alpha = dt / self.t_transient;
            self.f_act + (self.f_ref - self.f_act).scale(alpha)
        };
        self.f_act
    }

    /// Points the reference along `direction` with magnitude clipped to
    /// `[f_min, f_max]`. The reference is purely translational.
    pub fn set_reference(&mut self, direction: Vec2, magnitude: f64, f_min: f64, f_max: f64) {
        debug_assert!((direction.norm() - 1.0).abs() < 1e-9);
        self.f_ref = PlanarWrench::from_force(direction * magnitude.clamp(f_min, f_max));
    }

    /// Reference without clipping; used while ramping down to zero.
    pub fn set_reference_raw(&mut self, direction: Vec2, magnitude: f64) {
        self.f_ref = PlanarWrench::from_force(direction * magnitude.max(0.0));
    }

    pub fn clear_reference(&mut self) {
        self.f_ref = PlanarWrench::ZERO;
    }
}

/// Draws reference magnitudes from weak/medium/strong Gaussian levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForceSampler {
    pub f_min: f64,
    pub f_max: f64,
    pub sigma: f64,
    /// Means of the weak, medium and strong levels.
    pub level_means: [f64; 3],
    pub hard_probs: [f64; 3],
    pub soft_probs: [f64; 3],
    pub kcg_probs: [f64; 3],
}

impl Default for ForceSampler {
    fn default() -> Self {
        let (f_min, f_max) = (3.0, 15.0);
        Self {
            f_min,
            f_max,
            sigma: 0.6,
            level_means: Self::spread_means(f_min, f_max),
            hard_probs: [0.1, 0.3, 0.6],
            soft_probs: [0.2, 0.5, 0.3],
            kcg_probs: [0.7, 0.2, 0.1],
        }
    }
}

impl ForceSampler {
    /// Centres of the three equal sub-ranges of `[f_min, f_max]`.
    pub fn spread_means(f_min: f64, f_max: f64) -> [f64; 3] {
        let w = (f_max - f_min) / 3.0;
        [f_min + 0.5 * w, f_min + 1.5 * w, f_min + 2.5 * w]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "force limits must satisfy 0 < f_min < f_max (got {} / {})",
                self.f_min, self.f_max
            )));
        }
        if self.level_means.iter().any(|m| *m < self.f_min || *m > self.f_max) {
            return Err(Error::Config("level means must lie within [f_min, f_max]".into()));
        }
        for probs in [self.hard_probs, self.soft_probs, self.kcg_probs] {
            let sum: f64 = probs.iter().sum();
            if probs.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("level probabilities {probs:?} must sum to 1")));
            }
        }
        Ok(())
    }

    pub fn probabilities(&self, role: ControllerRole) -> [f64; 3] {
        match role {
            ControllerRole::Hard => self.hard_probs,
            ControllerRole::Soft => self.soft_probs,
            ControllerRole::Kcg => self.kcg_probs,
        }
    }

    pub fn pick_level<R: Rng + ?Sized>(&self, role: ControllerRole, rng: &mut R) -> StrengthLevel {
        let probs = self.probabilities(role);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for level in StrengthLevel::ALL {
            acc += probs[level.index()];
            if u < acc {
                return level;
            }
        }
        StrengthLevel::Strong
    }

    pub fn sample_level<R: Rng + ?Sized>(&self, level: StrengthLevel, rng: &mut R) -> f64 {
        let mean = self.level_means[level.index()];
        let draw = Normal::new(mean, self.sigma).map(|n| n.sample(rng)).unwrap_or(mean);
        draw.clamp(self.f_min, self.f_max)
    }

    /// Level by the role's probabilities, then a clipped Gaussian draw.
    pub fn sample_magnitude<R: Rng + ?Sized>(&self, role: ControllerRole, rng: &mut R) -> f64 {
        let level = self.pick_level(role, rng);
        self.sample_level(level, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DT: f64 = 0.002;

    fn toward_x(fx: f64) -> ActionForceState {
        ActionForceState { f_ref: PlanarWrench::new(fx, 0.0, 0.0), ..ActionForceState::default() }
    }

    #[test]
    fn first_step_moves_one_percent() {
        let mut s = toward_x(10.0);
        let f = s.step(DT, false);
        assert!((f.fx - 0.1).abs() < 1e-12 && f.fy == 0.0 && f.tau == 0.0);
    }

    #[test]
    fn hundred_steps_follow_geometric_series() {
        let mut s = toward_x(10.0);
        for _ in 0..100 {
            s.step(DT, false);
        }
        let expected = 10.0 * (1.0 - 0.99f64.powi(100));
        assert!((s.f_act.fx - expected).abs() < 1e-9);
        assert!((s.f_act.fx - 6.34).abs() < 0.01);
    }

    #[test]
    fn goal_zeroes_force() {
        let mut s = toward_x(10.0);
        s.f_act = PlanarWrench::new(4.0, -2.0, 0.3);
        assert_eq!(s.step(DT, true), PlanarWrench::ZERO);
    }

    #[test]
    fn reference_is_clipped() {
        let mut s = ActionForceState::default();
        s.set_reference(Vec2::new(1.0, 0.0), 16.2, 3.0, 15.0);
        assert!((s.f_ref.magnitude() - 15.0).abs() < 1e-12);
        s.set_reference(Vec2::new(1.0, 0.0), 1.0, 3.0, 15.0);
        assert!((s.f_ref.magnitude() - 3.0).abs() < 1e-12);
        s.set_reference(Vec2::new(0.0, 1.0), 9.0, 3.0, 15.0);
        assert_eq!(s.f_ref, PlanarWrench::new(0.0, 9.0, 0.0));
    }

    #[test]
    fn reaches_sixty_three_percent_after_transient() {
        let mut s = toward_x(10.0);
        let steps = (0.2 / DT).round() as usize;
        for _ in 0..steps {
            s.step(DT, false);
        }
        let frac = s.f_act.fx / 10.0;
        assert!((frac - 0.632).abs() < 0.01, "{frac}");
    }

    #[test]
    fn default_sampler_matches_declared_levels() {
        let s = ForceSampler::default();
        assert_eq!(s.level_means, [5.0, 9.0, 13.0]);
        assert_eq!(s.sigma, 0.6);
        s.validate().unwrap();
    }

    #[test]
    fn strong_level_statistics() {
        let s = ForceSampler::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..10_000).map(|_| s.sample_level(StrengthLevel::Strong, &mut rng)).collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 13.0).abs() < 0.05, "{mean}");
        assert!((var.sqrt() - 0.6).abs() < 0.05, "{}", var.sqrt());
    }

    #[test]
    fn role_level_frequencies_follow_probabilities() {
        let s = ForceSampler::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for role in [ControllerRole::Hard, ControllerRole::Soft, ControllerRole::Kcg] {
            let mut counts = [0usize; 3];
            for _ in 0..20_000 {
                counts[s.pick_level(role, &mut rng).index()] += 1;
            }
            for (c, p) in counts.iter().zip(s.probabilities(role)) {
                assert!((*c as f64 / 20_000.0 - p).abs() < 0.015);
            }
        }
    }

    #[test]
    fn validation_catches_bad_probabilities() {
        let s = ForceSampler { soft_probs: [0.5, 0.5, 0.5], ..ForceSampler::default() };
        assert!(s.validate().is_err());
        let s = ForceSampler { f_min: 20.0, ..ForceSampler::default() };
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn magnitudes_stay_in_limits(seed in any::<u64>()) {
            let s = ForceSampler::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for role in [ControllerRole::Hard, ControllerRole::Soft, ControllerRole::Kcg] {
                for _ in 0..50 {
                    let m = s.sample_magnitude(role, &mut rng);
                    prop_assert!((3.0..=15.0).contains(&m));
                }
            }
        }

        #[test]
        fn convex_combination_bound(fx in -20.0..20.0f64, fy in -20.0..20.0f64,
                                    angle in -3.2..3.2f64, mag in 0.0..20.0f64) {
            let mut s = ActionForceState { f_act: PlanarWrench::new(fx, fy, 0.0), ..Default::default() };
            s.set_reference(Vec2::new(angle.cos(), angle.sin()), mag, 3.0, 15.0);
            let gap0 = (s.f_act - s.f_ref).magnitude();
            for k in 1..300 {
                let before = s.f_act.magnitude();
                s.step(DT, false);
                prop_assert!(s.f_act.magnitude() <= before.max(s.f_ref.magnitude()) + 1e-12);
                let gap = (s.f_act - s.f_ref).magnitude();
                prop_assert!((gap - gap0 * 0.99f64.powi(k)).abs() <= 1e-9 * (1.0 + gap0));
            }
        }
    }
}
