//! One live trial. The session is plain synchronous state: the server feeds it
//! client messages and wall-clock time, and it answers with outbound messages.

use negotiate_core::harness::{RecordLevel, StepReport};
use negotiate_core::intent::LdaModel;
use negotiate_core::{HumanSide, PlanarWrench, RobotRole, Simulation, TrialConfig};

use crate::wire::{Body, ErrorCode, OutcomeReport, Snapshot, WireMessage, WIRE_SCHEMA_VERSION};
use crate::BridgeError;

/// Live input older than this (simulated time) is treated as zero, s.
pub const STALE_AFTER: f64 = 0.2;
/// Snapshot rate, Hz.
pub const SNAPSHOT_HZ: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
struct LiveInput {
    wrench: PlanarWrench,
    received_at: f64,
}

pub struct Session {
    id: String,
    config: TrialConfig,
    model: LdaModel,
    sim: Simulation,
    input: Option<LiveInput>,
    joined: bool,
    paused: bool,
    speed: f64,
    /// Outbound sequence number of the next message.
    seq: u64,
    last_client_seq: Option<u64>,
    /// Scheduled snapshots emitted since the trial started.
    snapshots: u64,
    /// Index into the log's events of the first one not yet reported.
    event_cursor: usize,
    /// Simulated time owed to the plant but smaller than a tick.
    carry: f64,
    last: Option<StepReport>,
}

impl Session {
    /// A session with a live human. The trial waits for `Join`.
    pub fn new(id: impl Into<String>, robot: RobotRole, seed: u64, model: LdaModel) -> Result<Self, BridgeError> {
        let config = TrialConfig {
            robot,
            human: HumanSide::Live,
            seed,
            record: RecordLevel::Summary,
            profile: Default::default(),
        };
        Self::with_config(id, config, model)
    }

    pub fn with_config(id: impl Into<String>, mut config: TrialConfig, model: LdaModel) -> Result<Self, BridgeError> {
        config.human = HumanSide::Live;
        let sim = Simulation::new(config.clone(), model.clone())?;
        Ok(Self {
            id: id.into(),
            config,
            model,
            sim,
            input: None,
            joined: false,
            paused: false,
            speed: 1.0,
            seq: 1,
            last_client_seq: None,
            snapshots: 0,
            event_cursor: 0,
            carry: 0.0,
            last: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &TrialConfig {
        &self.config
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn is_joined(&self) -> bool {
        self.joined
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// Wall-clock pacing multiplier requested by the client.
    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn set_speed(&mut self, speed: f64) {
        self.speed = speed;
    }

    /// Human wrench used by the most recent control tick.
    pub fn applied_wrench(&self) -> Option<PlanarWrench> {
        self.last.as_ref().map(|r| r.f_human)
    }

    /// Wrench the next control tick will use.
    pub fn pending_wrench(&self) -> PlanarWrench {
        match self.input {
            Some(i) if self.sim.time() - i.received_at <= STALE_AFTER + 1e-9 => i.wrench,
            _ => PlanarWrench::ZERO,
        }
    }

    fn cap(&self) -> f64 {
        self.config.profile.human.hard.force_cap
    }

    fn out(&mut self, body: Body) -> WireMessage {
        let m = WireMessage::new(self.id.clone(), self.seq, body);
        self.seq += 1;
        m
    }

    fn error(&mut self, code: ErrorCode, message: impl Into<String>) -> Vec<WireMessage> {
        vec![self.out(Body::Error { code, message: message.into() })]
    }

    /// Parses and applies one text frame from the client.
    pub fn handle_text(&mut self, text: &str) -> Vec<WireMessage> {
        match WireMessage::from_json(text) {
            Ok(m) => self.handle(m),
            Err(e) => self.error(ErrorCode::Malformed, e.to_string()),
        }
    }

    /// Applies one client message. Rejected messages leave the session as
    /// it was and produce an `Error`.
    pub fn handle(&mut self, msg: WireMessage) -> Vec<WireMessage> {
        if msg.v != WIRE_SCHEMA_VERSION {
            return self.error(ErrorCode::Version, format!("schema version {} not supported", msg.v));
        }
        if !msg.body.is_client() {
            return self.error(ErrorCode::Malformed, "not a client message");
        }
        if msg.body != Body::Join && msg.session != self.id {
            return self.error(ErrorCode::Session, format!("unknown session {:?}", msg.session));
        }
        if let Some(prev) = self.last_client_seq {
            if msg.seq <= prev {
                return self.error(ErrorCode::Sequence, format!("sequence {} after {}", msg.seq, prev));
            }
        }
        self.last_client_seq = Some(msg.seq);

        match msg.body {
            Body::Join => {
                self.joined = true;
                vec![self.snapshot()]
            }
            Body::HumanForce { fx, fy } => {
                if !(fx.is_finite() && fy.is_finite()) {
                    return self.error(ErrorCode::Invalid, "force must be finite");
                }
                let mag = fx.hypot(fy);
                let scale = if mag > self.cap() { self.cap() / mag } else { 1.0 };
                let w = PlanarWrench { fx: fx * scale, fy: fy * scale, tau: 0.0 };
                self.input = Some(LiveInput { wrench: w, received_at: self.sim.time() });
                Vec::new()
            }
            Body::Pause { paused } => {
                self.paused = paused;
                vec![self.snapshot()]
            }
            Body::Reset { seed } => {
                let mut config = self.config.clone();
                config.seed = seed.unwrap_or(config.seed.wrapping_add(1));
                self.restart(config)
            }
            Body::SetConfig { robot, seed, speed } => {
                if let Some(s) = speed {
                    if !(s.is_finite() && s > 0.0) {
                        return self.error(ErrorCode::Invalid, "speed must be positive");
                    }
                }
                let mut config = self.config.clone();
                if let Some(r) = robot {
                    config.robot = r;
                }
                if let Some(s) = seed {
                    config.seed = s;
                }
                let out = self.restart(config);
                if let (Some(s), Some(Body::SessionSnapshot(_))) = (speed, out.first().map(|m| &m.body)) {
                    self.speed = s;
                }
                out
            }
            _ => unreachable!("filtered above"),
        }
    }

    /// Fresh plant and machines under `config`. Sequence numbers carry on.
    fn restart(&mut self, config: TrialConfig) -> Vec<WireMessage> {
        match Simulation::new(config.clone(), self.model.clone()) {
            Ok(sim) => {
                self.sim = sim;
                self.config = config;
                self.input = None;
                self.snapshots = 0;
                self.event_cursor = 0;
                self.carry = 0.0;
                self.last = None;
                vec![self.snapshot()]
            }
            Err(e) => self.error(ErrorCode::Invalid, e.to_string()),
        }
    }

    /// Advances the trial by `dt` seconds of simulated time, in whole control
    /// ticks; any remainder is kept for the next call. Returns the snapshots
    /// falling due and, once, the outcome.
    pub fn tick_session(&mut self, dt: f64) -> Result<Vec<WireMessage>, BridgeError> {
        let mut out = Vec::new();
        if !self.joined || self.paused || self.sim.is_finished() {
            return Ok(out);
        }
        let rates = self.config.profile.rates;
        let tick = rates.control_dt();
        self.carry += dt;
        let n = (self.carry / tick + 1e-9).floor() as u64;
        self.carry = (self.carry - n as f64 * tick).max(0.0);
        for _ in 0..n {
            let w = self.pending_wrench();
            let report = self.sim.step(Some(w))?;
            let done = report.finished;
            let ticks = report.k + 1;
            self.last = Some(report);
            if ticks * SNAPSHOT_HZ >= (self.snapshots + 1) * rates.control_hz as u64 {
                self.snapshots += 1;
                out.push(self.snapshot());
            } else if done {
                out.push(self.snapshot());
            }
            if done {
                let o = *self.sim.outcome().expect("finished trial has an outcome");
                let report = OutcomeReport {
                    status: o.status,
                    goal: o.goal,
                    termination: o.termination,
                    duration: o.duration,
                    final_pose: o.final_pose,
                    robot: self.config.robot,
                    seed: self.config.seed,
                };
                out.push(self.out(Body::Outcome(report)));
                self.carry = 0.0;
                break;
            }
        }
        Ok(out)
    }

    /// Current render state.
    pub fn snapshot(&mut self) -> WireMessage {
        let events = self.sim.log().events[self.event_cursor..].to_vec();
        self.event_cursor = self.sim.log().events.len();
        let hlc = *self.sim.hlc_state();
        let state = match &self.last {
            Some(r) => Snapshot {
                t: r.t,
                pose: r.pose,
                twist: r.twist,
                f_act: r.f_act,
                f_human: r.f_human,
                machine: hlc.machine,
                phase: hlc.phase,
                active_goal: hlc.active_goal,
                posteriors: r.posteriors,
                f_str: r.stretch,
                events,
                paused: self.paused,
                finished: self.sim.is_finished(),
            },
            None => Snapshot {
                t: 0.0,
                pose: self.sim.goals().start(),
                twist: Default::default(),
                f_act: PlanarWrench::ZERO,
                f_human: PlanarWrench::ZERO,
                machine: hlc.machine,
                phase: hlc.phase,
                active_goal: hlc.active_goal,
                posteriors: [1.0 / 3.0; 3],
                f_str: 0.0,
                events,
                paused: self.paused,
                finished: false,
            },
        };
        self.out(Body::SessionSnapshot(state))
    }
}
