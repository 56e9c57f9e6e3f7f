//! Batches of independent trials run in parallel and aggregated in config
//! order, so results do not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, TrialMetrics, Winner};
use super::training::default_model;
use super::{run_trial, HumanSide, OutcomeStatus, RecordLevel, TrialConfig};
use crate::error::{Error, Result};
use crate::geometry::{Commitment, GoalAssignment};
use crate::hlc::RobotRole;
use crate::intent::LdaModel;
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    Interval { lo: (centre - half).max(0.0), hi: (centre + half).min(1.0) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub index: usize,
    pub seed: u64,
    pub robot: RobotRole,
    pub human: HumanSide,
    pub metrics: Option<TrialMetrics>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub failures: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub success_ci95: Interval,
    pub robot_wins: usize,
    pub human_wins: usize,
    pub no_winner: usize,
    pub aborts: usize,
    pub timeouts: usize,
    pub mean_switches: f64,
    pub mean_agreement_duration: Option<f64>,
    pub mean_disagreement_duration: Option<f64>,
}

impl GroupSummary {
    fn from_rows<'a>(label: String, rows: impl Iterator<Item = &'a BatchRow>) -> Self {
        let mut g = GroupSummary {
            label,
            n: 0,
            failures: 0,
            successes: 0,
            success_rate: 0.0,
            success_ci95: Interval { lo: 0.0, hi: 1.0 },
            robot_wins: 0,
            human_wins: 0,
            no_winner: 0,
            aborts: 0,
            timeouts: 0,
            mean_switches: 0.0,
            mean_agreement_duration: None,
            mean_disagreement_duration: None,
        };
        let (mut switches, mut a_runs, mut a_time, mut d_runs, mut d_time) = (0usize, 0usize, 0.0, 0usize, 0.0);
        for row in rows {
            g.n += 1;
            let Some(m) = &row.metrics else {
                g.failures += 1;
                continue;
            };
            g.successes += m.success as usize;
            match m.winner {
                Winner::Robot => g.robot_wins += 1,
                Winner::Human => g.human_wins += 1,
                Winner::None => g.no_winner += 1,
            }
            g.aborts += (m.status == OutcomeStatus::Aborted) as usize;
            g.timeouts += (m.status == OutcomeStatus::Timeout) as usize;
            switches += m.n_switches;
            a_runs += m.agreement_runs;
            a_time += m.agreement_time;
            d_runs += m.disagreement_runs;
            d_time += m.disagreement_time;
        }
        let ok = g.n - g.failures;
        if ok > 0 {
            g.success_rate = g.successes as f64 / ok as f64;
            g.mean_switches = switches as f64 / ok as f64;
        }
        g.success_ci95 = wilson_interval(g.successes, ok, 1.96);
        g.mean_agreement_duration = (a_runs > 0).then(|| a_time / a_runs as f64);
        g.mean_disagreement_duration = (d_runs > 0).then(|| d_time / d_runs as f64);
        g
    }

    /// Robot wins among trials that ended at exactly one agent's goal.
    pub fn robot_win_fraction(&self) -> Option<f64> {
        let decided = self.robot_wins + self.human_wins;
        (decided > 0).then(|| self.robot_wins as f64 / decided as f64)
    }

    pub fn abort_rate(&self) -> f64 {
        let ok = self.n - self.failures;
        if ok == 0 {
            0.0
        } else {
            self.aborts as f64 / ok as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub overall: GroupSummary,
    /// One entry per robot/human role pair, sorted by label.
    pub groups: Vec<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub rows: Vec<BatchRow>,
    pub summary: BatchSummary,
}

fn role_name(r: RobotRole) -> &'static str {
    match r {
        RobotRole::Kcg(_) => "kcg",
        RobotRole::Hard(_) => "hard",
        RobotRole::Soft(_) => "soft",
        RobotRole::Follower => "follower",
    }
}

fn commitment_name(c: Commitment) -> &'static str {
    match c {
        Commitment::Hard => "hard",
        Commitment::Soft => "soft",
        Commitment::Follower => "follower",
    }
}

fn human_name(h: HumanSide) -> &'static str {
    match h {
        HumanSide::Scripted(a) => commitment_name(a.commitment()),
        HumanSide::Live => "live",
    }
}

/// `robot-human` role-pair label, e.g. `hard-soft`.
pub fn pair_label(robot: RobotRole, human: HumanSide) -> String {
    format!("{}-{}", role_name(robot), human_name(human))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    index: usize,
    seed: u64,
    robot: &'a str,
    robot_goal: Option<usize>,
    human: &'a str,
    human_goal: Option<usize>,
    status: Option<&'a str>,
    goal: Option<usize>,
    termination: Option<&'a str>,
    success: Option<bool>,
    winner: Option<&'a str>,
    duration: Option<f64>,
    n_switches: Option<usize>,
    agreement_runs: Option<usize>,
    agreement_time: Option<f64>,
    disagreement_runs: Option<usize>,
    disagreement_time: Option<f64>,
    failure: Option<&'a str>,
}

impl BatchReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        use crate::hlc::Termination;
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            let m = r.metrics.as_ref();
            out.serialize(CsvRow {
                index: r.index,
                seed: r.seed,
                robot: role_name(r.robot),
                robot_goal: r.robot.goal(),
                human: human_name(r.human),
                human_goal: r.human.assignment().and_then(|a| a.goal_index()),
                status: m.map(|m| match m.status {
                    OutcomeStatus::Goal => "goal",
                    OutcomeStatus::Aborted => "aborted",
                    OutcomeStatus::Timeout => "timeout",
                }),
                goal: m.and_then(|m| m.goal),
                termination: m.and_then(|m| m.termination).map(|t| match t {
                    Termination::Nominal => "nominal",
                    Termination::Forced => "forced",
                    Termination::Aborted => "aborted",
                }),
                success: m.map(|m| m.success),
                winner: m.map(|m| match m.winner {
                    Winner::Robot => "robot",
                    Winner::Human => "human",
                    Winner::None => "none",
                }),
                duration: m.map(|m| m.duration),
                n_switches: m.map(|m| m.n_switches),
                agreement_runs: m.map(|m| m.agreement_runs),
                agreement_time: m.map(|m| m.agreement_time),
                disagreement_runs: m.map(|m| m.disagreement_runs),
                disagreement_time: m.map(|m| m.disagreement_time),
                failure: r.failure.as_deref(),
            })
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }

    pub fn group(&self, label: &str) -> Option<&GroupSummary> {
        self.summary.groups.iter().find(|g| g.label == label)
    }
}

fn run_one(config: &TrialConfig, model: Option<&LdaModel>) -> Result<TrialMetrics> {
    let trained;
    let model = match model {
        Some(m) => m,
        None => {
            trained = default_model(&config.profile)?;
            &trained
        }
    };
    compute_metrics(&run_trial(config, model)?)
}

/// Runs every config on `jobs` worker threads. Per-trial errors land in the
/// row's `failure` column. Without a model, each profile's default model is
/// trained once and reused.
pub fn run_batch(configs: &[TrialConfig], jobs: usize, model: Option<&LdaModel>) -> Result<BatchReport> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<TrialMetrics>> = pool.install(|| configs.par_iter().map(|c| run_one(c, model)).collect());
    let rows: Vec<BatchRow> = configs
        .iter()
        .zip(results)
        .enumerate()
        .map(|(index, (c, r))| {
            let (metrics, failure) = match r {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e.to_string())),
            };
            BatchRow { index, seed: c.seed, robot: c.robot, human: c.human, metrics, failure }
        })
        .collect();
    let mut by_pair: BTreeMap<String, Vec<&BatchRow>> = BTreeMap::new();
    for r in &rows {
        by_pair.entry(pair_label(r.robot, r.human)).or_default().push(r);
    }
    let groups = by_pair.into_iter().map(|(label, rs)| GroupSummary::from_rows(label, rs.into_iter())).collect();
    let overall = GroupSummary::from_rows("all".into(), rows.iter());
    Ok(BatchReport { rows, summary: BatchSummary { overall, groups } })
}

/// Draws `n` role-pair assignments: soft-soft with probability 0.25, the
/// rest uniform over the other pairs that give at least one agent a goal.
/// Goals are uniform per agent. Trial `i` gets seed `seed + i`.
pub fn generate_assignments(n: usize, seed: u64, profile: &Profile, record: RecordLevel) -> Vec<TrialConfig> {
    let n_goals = profile.goals.count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = [Commitment::Hard, Commitment::Soft, Commitment::Follower];
    let others: Vec<(Commitment, Commitment)> = all
        .iter()
        .flat_map(|&r| all.iter().map(move |&h| (r, h)))
        .filter(|&(r, h)| {
            !(r == Commitment::Soft && h == Commitment::Soft)
                && !(r == Commitment::Follower && h == Commitment::Follower)
        })
        .collect();
    (0..n)
        .map(|i| {
            let (rc, hc) = if rng.random::<f64>() < 0.25 {
                (Commitment::Soft, Commitment::Soft)
            } else {
                others[rng.random_range(0..others.len())]
            };
            let rg = rng.random_range(0..n_goals);
            let hg = rng.random_range(0..n_goals);
            let robot = match rc {
                Commitment::Hard => RobotRole::Hard(rg),
                Commitment::Soft => RobotRole::Soft(rg),
                Commitment::Follower => RobotRole::Follower,
            };
            let human = match hc {
                Commitment::Hard => GoalAssignment::hard(hg),
                Commitment::Soft => GoalAssignment::soft(hg),
                Commitment::Follower => GoalAssignment::follower(),
            };
            TrialConfig::new(robot, human, seed.wrapping_add(i as u64))
                .with_profile(profile.clone())
                .with_record(record)
        })
        .collect()
}
