//! Passive-mode data collection and the default intent model.
//!
//! A scripted human with randomized strength, timing and heading bias moves
//! the tray to a goal while the robot injects no force. Records are kept on
//! intent ticks where the human is active, up to arrival.
//!
//! Each trial also starts from its own tray orientation. With no robot force
//! the stretch equals the human force, so at a fixed orientation the stretch
//! features duplicate the goal projections and the classifier leans on them;
//! once the robot pushes during a real trial that reliance misreads the human.
//! Successive trials of a goal turn the grasp by a quarter turn from a random
//! start, so over every four trials of a goal the object-frame stretch
//! averages out and the classifier falls back on the projections.
//!
//! Start positions are scattered around the nominal start so the model sees
//! goal bearings other than the straight-line ones.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SensorChain;
use crate::dynamics::{goal_check, AdmittanceStepper};
use crate::error::Result;
use crate::geometry::{normalize_angle, Commitment, GoalAssignment, PlanarPose, PlanarWrench};
use crate::human::{human_step, HumanParams, HumanState};
use crate::intent::{extract_features, lda_fit, split_by_trial, LdaModel, Observation, TrainingRecord};
use crate::profile::Profile;

/// Training trials start up to this far from the nominal start, m.
const START_SPREAD: f64 = 0.3;
/// Bearing range of the start offset around the fan axis, rad.
const START_FAN: f64 = FRAC_PI_2;

/// Goal per trial: each consecutive block of `n_goals` trials is a random
/// permutation, so counts stay balanced.
fn stratified_goals(n_trials: usize, n_goals: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::with_capacity(n_trials);
    while out.len() < n_trials {
        let mut block: Vec<usize> = (0..n_goals).collect();
        block.shuffle(rng);
        out.extend(block);
    }
    out.truncate(n_trials);
    out
}

/// Strength spans the same range as the evaluation humans.
fn training_human(goal: usize, profile: &Profile, rng: &mut ChaCha8Rng) -> HumanParams {
    let bias = Normal::new(0.0, 4f64.to_radians()).expect("finite");
    let fs = profile.human.force_spread;
    HumanParams {
        nominal_force: profile.human.hard.nominal_force * (1.0 + rng.random_range(-fs..=fs)),
        reaction_delay: rng.random_range(0.1..0.4),
        buildup_tau: rng.random_range(0.15..0.5),
        heading_bias: bias.sample(rng).clamp(-0.2, 0.2),
        ..HumanParams::defaults_for(Commitment::Hard).with_assignment(GoalAssignment::hard(goal))
    }
}

/// Simulates `n_trials` passive-mode trials and returns labelled records.
pub fn generate_training_trials(n_trials: usize, profile: &Profile, seed: u64) -> Result<Vec<TrainingRecord>> {
    profile.validate()?;
    let goals = profile.goals.build()?;
    let rates = profile.rates;
    let dt = rates.control_dt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assigned = stratified_goals(n_trials, goals.len(), &mut rng);
    let max_ticks = (profile.training.max_duration * rates.control_hz as f64).round() as u64;
    let offsets: Vec<f64> = (0..goals.len()).map(|_| rng.random_range(-PI..PI)).collect();
    let mut repeats = vec![0usize; goals.len()];
    let mut out = Vec::new();
    for (trial_id, &goal) in assigned.iter().enumerate() {
        let params = training_human(goal, profile, &mut rng);
        let mut human = HumanState::new(&params, &goals, &mut rng);
        let theta = normalize_angle(offsets[goal] + FRAC_PI_2 * (repeats[goal] % 4) as f64);
        repeats[goal] += 1;
        let origin = goals.start();
        let reach = rng.random_range(0.0..START_SPREAD);
        let bearing = rng.random_range(-START_FAN..START_FAN);
        let start = PlanarPose { x: origin.x + reach * bearing.sin(), y: origin.y + reach * bearing.cos(), theta };
        let mut tray = AdmittanceStepper::new(profile.admittance, start)?;
        let mut sensors = SensorChain::new(&profile.sensing, rates.sensing_hz, rates.control_hz)?;
        for k in 0..max_ticks {
            let t = k as f64 * dt;
            let plant = *tray.state();
            if goal_check(&plant.pose, &goals).is_some() {
                break;
            }
            let f_h =
                human_step(&params, &mut human, &plant.pose, &plant.twist, &PlanarWrench::ZERO, &goals, dt, &mut rng);
            let f_s = sensors.tick(k, t, f_h, &mut rng);
            if k % rates.ticks_per_intent() == 0 {
                let obs = extract_features(
                    &plant.pose,
                    &plant.twist,
                    &f_s,
                    &PlanarWrench::ZERO,
                    &goals,
                    profile.intent.idle_threshold,
                )?;
                if let Observation::Active(features) = obs {
                    out.push(TrainingRecord { t, features, label: goal, trial_id });
                }
            }
            tray.step(PlanarWrench::ZERO, f_s);
        }
    }
    Ok(out)
}

/// Fits a model on the given records.
pub fn train_model(records: &[TrainingRecord], profile: &Profile) -> Result<LdaModel> {
    let samples: Vec<_> = records.iter().map(|r| (r.features, r.label)).collect();
    lda_fit(&samples, profile.intent.regularization)
}

/// Model trained on the training split of the profile's passive trials.
/// Cached per profile, so batches and tests train once.
pub fn default_model(profile: &Profile) -> Result<LdaModel> {
    static CACHE: OnceLock<Mutex<HashMap<String, LdaModel>>> = OnceLock::new();
    let key = serde_json::to_string(profile)?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(m) = cache.lock().expect("model cache poisoned").get(&key) {
        return Ok(m.clone());
    }
    let records = generate_training_trials(profile.training.n_trials, profile, profile.training.seed)?;
    let (train, _) = split_by_trial(records, profile.training.n_train);
    let model = train_model(&train, profile)?;
    cache.lock().expect("model cache poisoned").insert(key, model.clone());
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighteen_trials_are_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = stratified_goals(18, 3, &mut rng);
        for i in 0..3 {
            assert_eq!(g.iter().filter(|&&x| x == i).count(), 6);
        }
    }

    #[test]
    fn records_are_active_and_dense() {
        let p = Profile::default();
        let recs = generate_training_trials(3, &p, 11).unwrap();
        assert!(!recs.is_empty());
        for trial in 0..3 {
            let ts: Vec<f64> = recs.iter().filter(|r| r.trial_id == trial).map(|r| r.t).collect();
            assert!(ts.len() > 50);
            // every record non-idle
            for r in recs.iter().filter(|r| r.trial_id == trial) {
                assert!(r.features.human_force_magnitude() >= p.intent.idle_threshold);
            }
            // one record per 4 ms across the action phase
            let span = ts.last().unwrap() - ts.first().unwrap();
            assert!(((span * 250.0).round() as i64 + 1 - ts.len() as i64).abs() <= 1, "{span} {}", ts.len());
        }
    }
}
