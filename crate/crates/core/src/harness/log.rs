//! Trial logs and their two on-disk encodings.
//!
//! JSONL: a header line with the config, one `tick` line per control tick,
//! one `hlc` line per HLC tick, then `event` lines and a closing `outcome`.
//!
//! Binary: magic, version, a JSON header (everything except ticks), then the
//! ticks column by column as little-endian `f64`.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::TrialConfig;
use crate::error::{Error, Result};
use crate::geometry::{PlanarPose, PlanarTwist, PlanarWrench};
use crate::hlc::{Machine, Phase, Termination};
use crate::intent::{FeatureVector, IntentEstimate, IntentLabel, FEATURE_DIM, GOAL_COUNT};

pub const LOG_SCHEMA_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"NGLB";

/// How much a trial keeps in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordLevel {
    /// Every control tick.
    #[default]
    Full,
    /// HLC trace, events and outcome only.
    Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlcTraceRecord {
    pub t: f64,
    pub machine: Machine,
    pub phase: Phase,
    pub active_goal: Option<usize>,
    pub f_mag: f64,
    pub stretch: f64,
    pub intent_label: IntentLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub k: u64,
    pub t: f64,
    pub pose: PlanarPose,
    pub twist: PlanarTwist,
    /// Wrench the human actually applied.
    pub f_human: PlanarWrench,
    /// Filtered, held sensor reading the controllers saw.
    pub f_sensor: PlanarWrench,
    /// Action force after this tick's update.
    pub f_act: PlanarWrench,
    pub f_ref: PlanarWrench,
    /// `‖f_sensor − f_act‖` with the action force of the previous tick.
    pub stretch: f64,
    /// Present on intent ticks with a non-idle human.
    pub features: Option<FeatureVector>,
    /// Present on intent ticks.
    pub estimate: Option<IntentEstimate>,
    pub label: IntentLabel,
    pub committed: Option<usize>,
    /// Present on HLC ticks.
    pub hlc: Option<HlcTraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StartBeep,
    GraspBeep,
    GoalBeep,
    AbortStarted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Goal,
    Aborted,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: OutcomeStatus,
    pub goal: Option<usize>,
    pub termination: Option<Termination>,
    pub duration: f64,
    pub final_pose: PlanarPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub schema_version: u32,
    pub config: TrialConfig,
    pub records: Vec<TickRecord>,
    pub hlc_trace: Vec<HlcTraceRecord>,
    pub events: Vec<Event>,
    pub outcome: Option<Outcome>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header { schema_version: u32, config: Box<TrialConfig> },
    Tick(Box<TickRecord>),
    Hlc(HlcTraceRecord),
    Event(Event),
    Outcome(Outcome),
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    schema_version: u32,
    config: TrialConfig,
    hlc_trace: Vec<HlcTraceRecord>,
    events: Vec<Event>,
    outcome: Option<Outcome>,
    columns: Vec<String>,
    rows: u64,
}

impl TrialLog {
    pub fn new(config: TrialConfig) -> Self {
        Self {
            schema_version: LOG_SCHEMA_VERSION,
            config,
            records: Vec::new(),
            hlc_trace: Vec::new(),
            events: Vec::new(),
            outcome: None,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = |l: &Line| -> Result<()> {
            serde_json::to_writer(&mut w, l)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&Line::Header { schema_version: self.schema_version, config: Box::new(self.config.clone()) })?;
        for r in &self.records {
            line(&Line::Tick(Box::new(*r)))?;
        }
        for h in &self.hlc_trace {
            line(&Line::Hlc(*h))?;
        }
        for e in &self.events {
            line(&Line::Event(*e))?;
        }
        if let Some(o) = &self.outcome {
            line(&Line::Outcome(*o))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(buf)
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut log: Option<TrialLog> = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
            match (parsed, log.as_mut()) {
                (Line::Header { schema_version, config }, None) => {
                    if schema_version != LOG_SCHEMA_VERSION {
                        return Err(Error::Format(format!("unsupported log schema {schema_version}")));
                    }
                    log = Some(TrialLog::new(*config));
                }
                (Line::Header { .. }, Some(_)) => return Err(Error::Format(format!("line {}: second header", i + 1))),
                (_, None) => return Err(Error::Format("log does not start with a header".into())),
                (Line::Tick(t), Some(l)) => l.records.push(*t),
                (Line::Hlc(h), Some(l)) => l.hlc_trace.push(h),
                (Line::Event(e), Some(l)) => l.events.push(e),
                (Line::Outcome(o), Some(l)) => l.outcome = Some(o),
            }
        }
        log.ok_or_else(|| Error::Format("empty log".into()))
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let columns = column_names();
        let header = BinaryHeader {
            schema_version: self.schema_version,
            config: self.config.clone(),
            hlc_trace: self.hlc_trace.clone(),
            events: self.events.clone(),
            outcome: self.outcome,
            columns: columns.clone(),
            rows: self.records.len() as u64,
        };
        let header = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&LOG_SCHEMA_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let rows: Vec<Vec<f64>> = self.records.iter().map(encode_row).collect();
        for c in 0..columns.len() {
            for row in &rows {
                w.write_all(&row[c].to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a binary trial log".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != LOG_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported log schema {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let mut header = vec![0u8; u64::from_le_bytes(b8) as usize];
        r.read_exact(&mut header)?;
        let header: BinaryHeader = serde_json::from_slice(&header)?;
        if header.columns != column_names() {
            return Err(Error::Format("column layout mismatch".into()));
        }
        let n = header.rows as usize;
        let width = header.columns.len();
        let mut rows = vec![vec![0.0; width]; n];
        for c in 0..width {
            for row in rows.iter_mut() {
                r.read_exact(&mut b8)?;
                row[c] = f64::from_le_bytes(b8);
            }
        }
        let records = rows.iter().map(|row| decode_row(row)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema_version: header.schema_version,
            config: header.config,
            records,
            hlc_trace: header.hlc_trace,
            events: header.events,
            outcome: header.outcome,
        })
    }
}

const MACHINES: [Machine; 4] = [Machine::Kcg, Machine::Follower, Machine::Hard, Machine::Soft];
const PHASES: [Phase; 8] = [
    Phase::Perceiving,
    Phase::Agreement,
    Phase::Disagreement,
    Phase::AhgAgreement,
    Phase::AhgDisagreement,
    Phase::Abort,
    Phase::NominalTermination,
    Phase::ForcedTermination,
];

fn column_names() -> Vec<String> {
    let mut c: Vec<String> = [
        "k",
        "t",
        "x",
        "y",
        "theta",
        "vx",
        "vy",
        "wz",
        "fh_x",
        "fh_y",
        "fh_tau",
        "fs_x",
        "fs_y",
        "fs_tau",
        "fa_x",
        "fa_y",
        "fa_tau",
        "fr_x",
        "fr_y",
        "fr_tau",
        "stretch",
        "label",
        "committed",
        "has_features",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    c.extend((0..FEATURE_DIM).map(|i| format!("feature_{i}")));
    c.extend(["has_estimate", "est_label", "est_t"].iter().map(|s| s.to_string()));
    c.extend((0..GOAL_COUNT).map(|i| format!("posterior_{i}")));
    c.extend(
        ["has_hlc", "hlc_t", "machine", "phase", "active_goal", "f_mag", "hlc_stretch", "hlc_label"]
            .iter()
            .map(|s| s.to_string()),
    );
    c
}

fn label_code(l: IntentLabel) -> f64 {
    match l {
        IntentLabel::Idle => -1.0,
        IntentLabel::Goal(g) => g as f64,
    }
}

fn opt_code(g: Option<usize>) -> f64 {
    g.map_or(-1.0, |g| g as f64)
}

fn wrench(out: &mut Vec<f64>, w: &PlanarWrench) {
    out.extend([w.fx, w.fy, w.tau]);
}

fn encode_row(r: &TickRecord) -> Vec<f64> {
    let mut o = vec![r.k as f64, r.t, r.pose.x, r.pose.y, r.pose.theta, r.twist.vx, r.twist.vy, r.twist.wz];
    wrench(&mut o, &r.f_human);
    wrench(&mut o, &r.f_sensor);
    wrench(&mut o, &r.f_act);
    wrench(&mut o, &r.f_ref);
    o.push(r.stretch);
    o.push(label_code(r.label));
    o.push(opt_code(r.committed));
    o.push(r.features.is_some() as u8 as f64);
    o.extend(r.features.map_or([0.0; FEATURE_DIM], |f| f.0));
    o.push(r.estimate.is_some() as u8 as f64);
    match &r.estimate {
        Some(e) => {
            o.push(label_code(e.label));
            o.push(e.t);
            o.extend(e.posteriors);
        }
        None => o.extend([0.0; 2 + GOAL_COUNT]),
    }
    o.push(r.hlc.is_some() as u8 as f64);
    match &r.hlc {
        Some(h) => o.extend([
            h.t,
            MACHINES.iter().position(|m| *m == h.machine).unwrap_or(0) as f64,
            PHASES.iter().position(|p| *p == h.phase).unwrap_or(0) as f64,
            opt_code(h.active_goal),
            h.f_mag,
            h.stretch,
            label_code(h.intent_label),
        ]),
        None => o.extend([0.0; 7]),
    }
    o
}

struct Cursor<'a> {
    row: &'a [f64],
    i: usize,
}

impl Cursor<'_> {
    fn f(&mut self) -> f64 {
        let v = self.row[self.i];
        self.i += 1;
        v
    }

    fn flag(&mut self) -> bool {
        self.f() != 0.0
    }

    fn index(&mut self) -> Option<usize> {
        let v = self.f();
        (v >= 0.0).then_some(v as usize)
    }

    fn label(&mut self) -> IntentLabel {
        self.index().map_or(IntentLabel::Idle, IntentLabel::Goal)
    }

    fn wrench(&mut self) -> PlanarWrench {
        PlanarWrench { fx: self.f(), fy: self.f(), tau: self.f() }
    }
}

fn decode_row(row: &[f64]) -> Result<TickRecord> {
    let mut c = Cursor { row, i: 0 };
    let k = c.f() as u64;
    let t = c.f();
    let pose = PlanarPose { x: c.f(), y: c.f(), theta: c.f() };
    let twist = PlanarTwist { vx: c.f(), vy: c.f(), wz: c.f() };
    let f_human = c.wrench();
    let f_sensor = c.wrench();
    let f_act = c.wrench();
    let f_ref = c.wrench();
    let stretch = c.f();
    let label = c.label();
    let committed = c.index();
    let has_features = c.flag();
    let mut fv = [0.0; FEATURE_DIM];
    fv.iter_mut().for_each(|v| *v = c.f());
    let features = has_features.then_some(FeatureVector(fv));
    let has_estimate = c.flag();
    let est_label = c.label();
    let est_t = c.f();
    let mut posteriors = [0.0; GOAL_COUNT];
    posteriors.iter_mut().for_each(|v| *v = c.f());
    let estimate = has_estimate.then_some(IntentEstimate { label: est_label, posteriors, t: est_t });
    let has_hlc = c.flag();
    let hlc_t = c.f();
    let machine = *MACHINES.get(c.f() as usize).ok_or_else(|| Error::Format("bad machine code".into()))?;
    let phase = *PHASES.get(c.f() as usize).ok_or_else(|| Error::Format("bad phase code".into()))?;
    let active_goal = c.index();
    let f_mag = c.f();
    let hlc_stretch = c.f();
    let intent_label = c.label();
    let hlc = has_hlc.then_some(HlcTraceRecord {
        t: hlc_t,
        machine,
        phase,
        active_goal,
        f_mag,
        stretch: hlc_stretch,
        intent_label,
    });
    Ok(TickRecord {
        k,
        t,
        pose,
        twist,
        f_human,
        f_sensor,
        f_act,
        f_ref,
        stretch,
        features,
        estimate,
        label,
        committed,
        hlc,
    })
}
