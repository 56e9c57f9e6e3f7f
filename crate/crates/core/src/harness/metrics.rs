//! Per-trial success, winner and agreement/disagreement statistics.

use serde::{Deserialize, Serialize};

use super::log::{HlcTraceRecord, OutcomeStatus, TrialLog};
use super::HumanSide;
use crate::error::{Error, Result};
use crate::geometry::Commitment;
use crate::hlc::{Phase, RobotRole, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Robot,
    Human,
    None,
}

/// Coarse class of an HLC phase for switch counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseClass {
    Agreement,
    Disagreement,
    Other,
}

impl From<Phase> for PhaseClass {
    fn from(p: Phase) -> Self {
        if p.is_agreement() {
            PhaseClass::Agreement
        } else if p.is_disagreement() {
            PhaseClass::Disagreement
        } else {
            PhaseClass::Other
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub success: bool,
    pub winner: Winner,
    pub status: OutcomeStatus,
    pub goal: Option<usize>,
    pub termination: Option<Termination>,
    pub duration: f64,
    pub n_switches: usize,
    pub agreement_runs: usize,
    pub agreement_time: f64,
    pub disagreement_runs: usize,
    pub disagreement_time: f64,
}

impl TrialMetrics {
    pub fn mean_agreement(&self) -> Option<f64> {
        (self.agreement_runs > 0).then(|| self.agreement_time / self.agreement_runs as f64)
    }

    pub fn mean_disagreement(&self) -> Option<f64> {
        (self.disagreement_runs > 0).then(|| self.disagreement_time / self.disagreement_runs as f64)
    }

    pub fn aborted(&self) -> bool {
        self.status == OutcomeStatus::Aborted
    }
}

/// Runs of identical phase class as `(class, start, end)`.
pub(crate) fn phase_runs(trace: &[HlcTraceRecord], end: f64) -> Vec<(PhaseClass, f64, f64)> {
    let mut runs: Vec<(PhaseClass, f64, f64)> = Vec::new();
    for r in trace {
        let class = PhaseClass::from(r.phase);
        match runs.last_mut() {
            Some(last) if last.0 == class => {}
            Some(last) => {
                last.2 = r.t;
                runs.push((class, r.t, r.t));
            }
            None => runs.push((class, r.t, r.t)),
        }
    }
    if let Some(last) = runs.last_mut() {
        last.2 = end.max(last.1);
    }
    runs
}

/// Counts agreement/disagreement switches and accumulates run durations.
/// Runs of other phases are transparent for switch counting.
fn switch_stats(trace: &[HlcTraceRecord], end: f64) -> (usize, [(usize, f64); 2]) {
    let runs = phase_runs(trace, end);
    let mut stats = [(0usize, 0.0f64); 2];
    let mut prev: Option<PhaseClass> = None;
    let mut switches = 0;
    for (class, start, stop) in runs {
        let slot = match class {
            PhaseClass::Agreement => 0,
            PhaseClass::Disagreement => 1,
            PhaseClass::Other => continue,
        };
        stats[slot].0 += 1;
        stats[slot].1 += stop - start;
        if prev.is_some_and(|p| p != class) {
            switches += 1;
        }
        prev = Some(class);
    }
    (switches, stats)
}

fn success_and_winner(
    robot: RobotRole,
    human: Option<(Commitment, Option<usize>)>,
    goal: Option<usize>,
) -> (bool, Winner) {
    let r = robot.goal();
    let h = human.and_then(|(_, g)| g);
    let winner = match goal {
        Some(g) if Some(g) == r && Some(g) != h => Winner::Robot,
        Some(g) if Some(g) == h && Some(g) != r => Winner::Human,
        _ => Winner::None,
    };
    let Some(g) = goal else { return (false, winner) };
    let human_c = human.map(|(c, _)| c);
    let success = match robot {
        RobotRole::Follower => match h {
            Some(h) => g == h,
            None => true,
        },
        RobotRole::Hard(rg) | RobotRole::Kcg(rg) => g == rg,
        RobotRole::Soft(rg) => match human_c {
            Some(Commitment::Soft) => Some(g) == h || g == rg,
            Some(Commitment::Hard) => Some(g) == h,
            Some(Commitment::Follower) | None => g == rg,
        },
    };
    (success, winner)
}

pub fn compute_metrics(log: &TrialLog) -> Result<TrialMetrics> {
    let outcome = log.outcome.ok_or_else(|| Error::IncompleteLog("trial has no outcome".into()))?;
    if log.hlc_trace.is_empty() {
        return Err(Error::IncompleteLog("trial has no HLC trace".into()));
    }
    let (n_switches, [(agreement_runs, agreement_time), (disagreement_runs, disagreement_time)]) =
        switch_stats(&log.hlc_trace, outcome.duration);
    let human = match log.config.human {
        HumanSide::Scripted(a) => Some((a.commitment(), a.goal_index())),
        HumanSide::Live => None,
    };
    let goal = if outcome.status == OutcomeStatus::Goal { outcome.goal } else { None };
    let (success, winner) = success_and_winner(log.config.robot, human, goal);
    Ok(TrialMetrics {
        success,
        winner,
        status: outcome.status,
        goal,
        termination: outcome.termination,
        duration: outcome.duration,
        n_switches,
        agreement_runs,
        agreement_time,
        disagreement_runs,
        disagreement_time,
    })
}
