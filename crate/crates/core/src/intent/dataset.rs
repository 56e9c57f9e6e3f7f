//! JSONL training-set records, one per intent tick.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub t: f64,
    pub features: FeatureVector,
    pub label: usize,
    pub trial_id: usize,
}

pub fn write_records<W: Write>(mut w: W, records: &[TrainingRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records, skipping blank lines. Errors carry the 1-based line number.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<TrainingRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrainingRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        if rec.features.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("line {}: non-finite feature", i + 1)));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Splits records into (train, test) by trial id: ids below `n_train_trials`
/// go to training.
pub fn split_by_trial(
    records: Vec<TrainingRecord>,
    n_train_trials: usize,
) -> (Vec<TrainingRecord>, Vec<TrainingRecord>) {
    records.into_iter().partition(|r| r.trial_id < n_train_trials)
}
