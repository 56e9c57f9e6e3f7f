//! Every tunable of the simulator in one declarative TOML document.
//!
//! Missing tables and keys fall back to the built-in defaults, so a trial is
//! reproducible from a profile file and a seed alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::ForceSampler;
use crate::dynamics::AdmittanceParams;
use crate::error::{Error, Result};
use crate::geometry::{Commitment, GoalSet};
use crate::hlc::HlcConfig;
use crate::human::HumanParams;
use crate::intent::IntentConfig;

/// Loop rates in Hz. Every rate except sensing must divide the control rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rates {
    pub control_hz: u32,
    pub hlc_hz: u32,
    pub intent_hz: u32,
    pub sensing_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self { control_hz: 500, hlc_hz: 50, intent_hz: 250, sensing_hz: 200 }
    }
}

impl Rates {
    pub fn validate(&self) -> Result<()> {
        let Rates { control_hz, hlc_hz, intent_hz, sensing_hz } = *self;
        if control_hz == 0 || hlc_hz == 0 || intent_hz == 0 || sensing_hz == 0 {
            return Err(Error::Config("rates must be positive".into()));
        }
        if control_hz % hlc_hz != 0 || control_hz % intent_hz != 0 {
            return Err(Error::Config(format!(
                "hlc ({hlc_hz} Hz) and intent ({intent_hz} Hz) rates must divide the control rate ({control_hz} Hz)"
            )));
        }
        if sensing_hz > control_hz {
            return Err(Error::Config("sensing cannot run faster than control".into()));
        }
        Ok(())
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_hz as f64
    }

    pub fn ticks_per_hlc(&self) -> u64 {
        (self.control_hz / self.hlc_hz) as u64
    }

    pub fn ticks_per_intent(&self) -> u64 {
        (self.control_hz / self.intent_hz) as u64
    }
}

/// Fan of goal sites around the start pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalGeometry {
    pub count: usize,
    pub radius: f64,
    pub separation_deg: f64,
    pub reach_tolerance: f64,
}

impl Default for GoalGeometry {
    fn default() -> Self {
        Self { count: 3, radius: 0.5, separation_deg: 40.0, reach_tolerance: 0.03 }
    }
}

impl GoalGeometry {
    pub fn build(&self) -> Result<GoalSet> {
        GoalSet::fan(self.count, self.radius, self.separation_deg.to_radians(), self.reach_tolerance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensingConfig {
    pub cutoff_hz: f64,
    pub filter_order: usize,
    pub warm_start: bool,
    /// Per-axis white noise added to raw force samples, N.
    pub noise_std: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self { cutoff_hz: 5.0, filter_order: 2, warm_start: true, noise_std: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionConfig {
    pub t_transient: f64,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self { t_transient: 0.2 }
    }
}

/// Scripted human partners, one parameter set per commitment plus the
/// per-trial randomization applied on top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanProfile {
    pub hard: HumanParams,
    pub soft: HumanParams,
    pub follower: HumanParams,
    /// Nominal force is drawn uniformly within ± this fraction.
    pub force_spread: f64,
    /// Reaction delay is drawn uniformly within ± this fraction.
    pub delay_spread: f64,
}

impl Default for HumanProfile {
    fn default() -> Self {
        Self {
            hard: HumanParams::defaults_for(Commitment::Hard),
            soft: HumanParams::defaults_for(Commitment::Soft),
            follower: HumanParams::defaults_for(Commitment::Follower),
            force_spread: 0.5,
            delay_spread: 0.4,
        }
    }
}

impl HumanProfile {
    pub fn params_for(&self, c: Commitment) -> HumanParams {
        match c {
            Commitment::Hard => self.hard,
            Commitment::Soft => self.soft,
            Commitment::Follower => self.follower,
        }
    }
}

/// Passive-mode data collection used to train the default intent model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Passive trials simulated; the first `n_train` fit the model, the rest
    /// are held out.
    pub n_trials: usize,
    pub n_train: usize,
    pub seed: u64,
    pub max_duration: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { n_trials: 60, n_train: 48, seed: 20_240_318, max_duration: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    pub rates: Rates,
    pub goals: GoalGeometry,
    pub admittance: AdmittanceParams,
    pub sensing: SensingConfig,
    pub action: ActionConfig,
    pub sampler: ForceSampler,
    pub hlc: HlcConfig,
    pub intent: IntentConfig,
    pub human: HumanProfile,
    pub training: TrainingConfig,
    /// Trial length limit; reaching it is a timeout, s.
    pub max_duration: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Self {
            rates: Rates::default(),
            goals: GoalGeometry::default(),
            admittance: AdmittanceParams::default(),
            sensing: SensingConfig::default(),
            action: ActionConfig::default(),
            sampler: ForceSampler::default(),
            hlc: HlcConfig::default(),
            intent: IntentConfig::default(),
            human: HumanProfile::default(),
            training: TrainingConfig::default(),
            max_duration: 20.0,
        }
    }
}

impl Profile {
    /// Defaults plus occasional goal swaps by the human and sensor noise.
    pub fn realistic() -> Self {
        let mut p = Self::default();
        p.human.hard.swap_error_prob = 0.05;
        p.human.soft.swap_error_prob = 0.05;
        p.sensing.noise_std = 0.3;
        p
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "realistic" => Ok(Self::realistic()),
            other => Err(Error::Config(format!("unknown built-in profile '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.admittance.validate()?;
        if (self.admittance.dt - self.rates.control_dt()).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "admittance dt {} does not match the control rate {} Hz",
                self.admittance.dt, self.rates.control_hz
            )));
        }
        if (self.hlc.tick_hz - self.rates.hlc_hz as f64).abs() > 1e-9 {
            return Err(Error::Config("hlc tick rate does not match rates.hlc_hz".into()));
        }
        self.hlc.validate()?;
        self.sampler.validate()?;
        self.goals.build()?;
        if !(self.action.t_transient > 0.0) {
            return Err(Error::Config("action transient must be positive".into()));
        }
        if !(self.max_duration > 0.0) || !(self.training.max_duration > 0.0) {
            return Err(Error::Config("durations must be positive".into()));
        }
        if self.training.n_train == 0 || self.training.n_train >= self.training.n_trials {
            return Err(Error::Config("training split must leave trials on both sides".into()));
        }
        if !(self.human.force_spread >= 0.0 && self.human.force_spread < 1.0)
            || !(self.human.delay_spread >= 0.0 && self.human.delay_spread < 1.0)
        {
            return Err(Error::Config("human spreads must lie in [0, 1)".into()));
        }
        if self.sensing.noise_std < 0.0 {
            return Err(Error::Config("sensor noise must be non-negative".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Profile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
