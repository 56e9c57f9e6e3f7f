//! Intent recognition: features, discriminant classifier, idle detection and
//! the perception accumulators that feed the high-level controller.

mod accumulator;
mod dataset;
mod features;
mod lda;

pub use accumulator::{IntentAccumulator, IntentEstimate, IntentLabel, LabelHysteresis};
pub use dataset::{read_records, split_by_trial, write_records, TrainingRecord};
pub use features::{extract_features, FeatureVector, Observation, FEATURE_DIM, FEATURE_SCHEMA_VERSION, GOAL_COUNT};
pub use lda::{LdaModel, ModelFile, Regularization, MODEL_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tunables of the perception chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntentConfig {
    /// ‖F_H‖ below this is reported as idle, N.
    pub idle_threshold: f64,
    /// Window over which the accumulator looks for a majority, s.
    pub commit_duration: f64,
    /// Persistence required before the per-tick label seen by the HLC changes, s.
    pub hysteresis: f64,
    pub regularization: Regularization,
}

impl Default for IntentConfig {
    fn default() -> Self {
        Self { idle_threshold: 1.5, commit_duration: 0.5, hysteresis: 0.2, regularization: Regularization::Auto }
    }
}

/// Predicts a goal from a feature vector.
pub fn lda_predict(model: &LdaModel, x: &FeatureVector, t: f64) -> IntentEstimate {
    let (best, post) = model.classify(x.as_slice());
    let mut posteriors = [0.0; GOAL_COUNT];
    for (dst, src) in posteriors.iter_mut().zip(&post) {
        *dst = *src;
    }
    IntentEstimate { label: IntentLabel::Goal(best), posteriors, t }
}

/// Fits a model on labelled feature vectors.
pub fn lda_fit(samples: &[(FeatureVector, usize)], reg: Regularization) -> Result<LdaModel> {
    if samples.iter().any(|(_, l)| *l >= GOAL_COUNT) {
        return Err(Error::InsufficientData(format!("labels must be below {GOAL_COUNT}")));
    }
    let x: Vec<&[f64]> = samples.iter().map(|(f, _)| f.as_slice()).collect();
    let y: Vec<usize> = samples.iter().map(|(_, l)| *l).collect();
    let model = LdaModel::fit(&x, &y, reg)?;
    if model.n_classes() != GOAL_COUNT {
        return Err(Error::InsufficientData(format!(
            "expected samples for all {GOAL_COUNT} goals, found {} classes",
            model.n_classes()
        )));
    }
    Ok(model)
}

/// Runtime perception stack: classifier, accumulator and hysteresis.
#[derive(Debug, Clone)]
pub struct IntentRecognizer {
    model: LdaModel,
    accumulator: IntentAccumulator,
    hysteresis: LabelHysteresis,
    latest: Option<IntentEstimate>,
}

/// What the recognizer reports after one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perception {
    pub estimate: IntentEstimate,
    /// Label after hysteresis; this is what the HLC reacts to per tick.
    pub filtered: IntentLabel,
    pub committed: Option<usize>,
    pub leading: Option<usize>,
}

impl IntentRecognizer {
    pub fn new(model: LdaModel, cfg: &IntentConfig, rate_hz: f64) -> Result<Self> {
        if model.dim() != FEATURE_DIM || model.n_classes() != GOAL_COUNT {
            return Err(Error::Config(format!(
                "model is {}-dimensional with {} classes, expected {FEATURE_DIM} and {GOAL_COUNT}",
                model.dim(),
                model.n_classes()
            )));
        }
        Ok(Self {
            model,
            accumulator: IntentAccumulator::new(cfg.commit_duration, rate_hz),
            hysteresis: LabelHysteresis::new(cfg.hysteresis),
            latest: None,
        })
    }

    pub fn model(&self) -> &LdaModel {
        &self.model
    }

    pub fn observe(&mut self, obs: &Observation, t: f64) -> Perception {
        let estimate = match obs {
            Observation::Idle => IntentEstimate::idle(t),
            Observation::Active(x) => lda_predict(&self.model, x, t),
        };
        let committed = self.accumulator.accumulate(&estimate);
        let filtered = self.hysteresis.update(estimate.label, t);
        self.latest = Some(estimate);
        Perception { estimate, filtered, committed, leading: self.accumulator.leading() }
    }

    /// The most recent perception without advancing time.
    pub fn current(&self) -> Perception {
        Perception {
            estimate: self.latest.unwrap_or_else(|| IntentEstimate::idle(0.0)),
            filtered: self.hysteresis.current(),
            committed: self.accumulator.committed(),
            leading: self.accumulator.leading(),
        }
    }
}
