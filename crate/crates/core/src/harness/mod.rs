//! Fixed-step multi-rate trial runner, metrics and batch experiments.
//!
//! One control tick `k` at `t = k / control_hz` runs, in order:
//!
//! 1. human wrench (scripted model or live input)
//! 2. sensing, when a 200 Hz sample is due: noise, low-pass, hold
//! 3. intent, every `control/intent` ticks
//! 4. arrival check and HLC, every `control/hlc` ticks and on arrival
//! 5. action-force transient toward the current reference
//! 6. admittance law and plant integration to `t + dt`

mod batch;
mod log;
mod metrics;
mod training;

pub use batch::{
    generate_assignments, run_batch, wilson_interval, BatchReport, BatchRow, BatchSummary, GroupSummary, Interval,
};
pub use log::{
    Event, EventKind, HlcTraceRecord, Outcome, OutcomeStatus, RecordLevel, TickRecord, TrialLog, LOG_SCHEMA_VERSION,
};
pub use metrics::{compute_metrics, PhaseClass, TrialMetrics, Winner};
pub use training::{default_model, generate_training_trials, train_model};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::action::ActionForceState;
use crate::dynamics::{goal_check, AdmittanceStepper};
use crate::error::{Error, Result};
use crate::geometry::{Commitment, GoalAssignment, GoalSet, PlanarPose, PlanarTwist, PlanarWrench};
use crate::hlc::{Hlc, HlcInputs, HlcOutput, HlcState, Machine, Phase, RobotRole, Termination};
use crate::human::{human_step, HumanParams, HumanState};
use crate::intent::{extract_features, IntentEstimate, IntentLabel, IntentRecognizer, LdaModel, Observation};
use crate::profile::{Profile, SensingConfig};
use crate::signal::{design_lowpass, WrenchFilter, WrenchHold};

/// Who plays the human side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanSide {
    Scripted(GoalAssignment),
    /// Wrenches arrive from outside, one per control tick.
    Live,
}

impl HumanSide {
    pub fn assignment(&self) -> Option<GoalAssignment> {
        match self {
            HumanSide::Scripted(a) => Some(*a),
            HumanSide::Live => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub robot: RobotRole,
    pub human: HumanSide,
    pub seed: u64,
    #[serde(default)]
    pub record: RecordLevel,
    #[serde(default)]
    pub profile: Profile,
}

impl TrialConfig {
    pub fn new(robot: RobotRole, human: GoalAssignment, seed: u64) -> Self {
        Self { robot, human: HumanSide::Scripted(human), seed, record: RecordLevel::Full, profile: Profile::default() }
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_record(mut self, record: RecordLevel) -> Self {
        self.record = record;
        self
    }

    pub fn validate(&self) -> Result<GoalSet> {
        self.profile.validate()?;
        let goals = self.profile.goals.build()?;
        let check = |g: Option<usize>| match g {
            Some(i) if i >= goals.len() => Err(Error::GoalIndex { index: i, len: goals.len() }),
            _ => Ok(()),
        };
        check(self.robot.goal())?;
        if let HumanSide::Scripted(a) = self.human {
            check(a.goal_index())?;
            self.profile.human.params_for(a.commitment()).with_assignment(a).validate(self.profile.sampler.f_max)?;
        }
        Ok(goals)
    }
}

/// Seeds independent random streams for each consumer in a trial.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const STREAM_HLC: u64 = 1;
const STREAM_HUMAN: u64 = 2;
const STREAM_SENSOR: u64 = 3;

/// The 200 Hz sensing path: additive noise, Butterworth low-pass and a
/// zero-order hold up to the control rate. Samples fall due on an integer
/// schedule so no floating-point drift creeps into the timing.
#[derive(Debug, Clone)]
pub struct SensorChain {
    filter: WrenchFilter,
    hold: WrenchHold,
    noise: Option<Normal<f64>>,
    control_hz: u64,
    sensing_hz: u64,
    next_sample: u64,
}

impl SensorChain {
    pub fn new(cfg: &SensingConfig, sensing_hz: u32, control_hz: u32) -> Result<Self> {
        let coeffs = design_lowpass(cfg.cutoff_hz, sensing_hz as f64, cfg.filter_order)?;
        let noise = if cfg.noise_std > 0.0 {
            Some(Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            filter: WrenchFilter::new(coeffs, cfg.warm_start),
            hold: WrenchHold::default(),
            noise,
            control_hz: control_hz as u64,
            sensing_hz: sensing_hz as u64,
            next_sample: 0,
        })
    }

    /// Feeds the true wrench at control tick `k`; returns the held filtered value.
    pub fn tick(&mut self, k: u64, t: f64, raw: PlanarWrench, rng: &mut ChaCha8Rng) -> PlanarWrench {
        if self.next_sample * self.control_hz <= k * self.sensing_hz {
            let mut w = raw;
            if let Some(n) = &self.noise {
                w.fx += n.sample(rng);
                w.fy += n.sample(rng);
            }
            let y = self.filter.step(w);
            self.hold.push(t, y);
            self.next_sample += 1;
        }
        self.hold.value()
    }

    pub fn value(&self) -> PlanarWrench {
        self.hold.value()
    }
}

/// Snapshot of the loop after a control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub k: u64,
    pub t: f64,
    pub pose: PlanarPose,
    pub twist: PlanarTwist,
    pub f_human: PlanarWrench,
    pub f_sensor: PlanarWrench,
    pub f_act: PlanarWrench,
    pub stretch: f64,
    pub hlc: HlcState,
    pub posteriors: [f64; 3],
    pub label: IntentLabel,
    pub new_events: usize,
    pub finished: bool,
}

struct ScriptedHuman {
    params: HumanParams,
    state: HumanState,
}

/// A trial in progress. `run_trial` drives it to completion; the live bridge
/// drives it tick by tick with external wrenches.
pub struct Simulation {
    config: TrialConfig,
    goals: GoalSet,
    hlc: Hlc,
    hlc_state: HlcState,
    hlc_out: HlcOutput,
    recognizer: IntentRecognizer,
    tray: AdmittanceStepper,
    action: ActionForceState,
    sensors: SensorChain,
    human: Option<ScriptedHuman>,
    rng_hlc: ChaCha8Rng,
    rng_human: ChaCha8Rng,
    rng_sensor: ChaCha8Rng,
    k: u64,
    max_ticks: u64,
    grasped: bool,
    aborting: bool,
    latest_estimate: IntentEstimate,
    log: TrialLog,
}

impl Simulation {
    pub fn new(config: TrialConfig, model: LdaModel) -> Result<Self> {
        let goals = config.validate()?;
        let p = &config.profile;
        let hlc = Hlc::new(p.hlc, p.sampler.clone(), goals.clone())?;
        let mut rng_hlc = stream(config.seed, STREAM_HLC);
        let mut rng_human = stream(config.seed, STREAM_HUMAN);
        let hlc_state = hlc.init(config.robot, 0.0, &mut rng_hlc)?;
        let hlc_out = hlc.output(&hlc_state);
        let recognizer = IntentRecognizer::new(model, &p.intent, p.rates.intent_hz as f64)?;
        let tray = AdmittanceStepper::new(p.admittance, goals.start())?;
        let sensors = SensorChain::new(&p.sensing, p.rates.sensing_hz, p.rates.control_hz)?;
        let human = match config.human {
            HumanSide::Scripted(a) => {
                let params = randomize_human(p, a, &mut rng_human);
                let state = HumanState::new(&params, &goals, &mut rng_human);
                Some(ScriptedHuman { params, state })
            }
            HumanSide::Live => None,
        };
        let max_ticks = (p.max_duration * p.rates.control_hz as f64).round() as u64;
        let mut log = TrialLog::new(config.clone());
        log.events.push(Event { t: 0.0, kind: EventKind::StartBeep });
        Ok(Self {
            rng_sensor: stream(config.seed, STREAM_SENSOR),
            action: ActionForceState::new(p.action.t_transient),
            config,
            goals,
            hlc,
            hlc_state,
            hlc_out,
            recognizer,
            tray,
            sensors,
            human,
            rng_hlc,
            rng_human,
            k: 0,
            max_ticks,
            grasped: false,
            aborting: false,
            latest_estimate: IntentEstimate::idle(0.0),
            log,
        })
    }

    pub fn config(&self) -> &TrialConfig {
        &self.config
    }

    pub fn goals(&self) -> &GoalSet {
        &self.goals
    }

    pub fn hlc_state(&self) -> &HlcState {
        &self.hlc_state
    }

    /// State of the scripted human, if any.
    pub fn human_state(&self) -> Option<&HumanState> {
        self.human.as_ref().map(|h| &h.state)
    }

    pub fn is_finished(&self) -> bool {
        self.log.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.log.outcome.as_ref()
    }

    pub fn log(&self) -> &TrialLog {
        &self.log
    }

    pub fn into_log(self) -> TrialLog {
        self.log
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.config.profile.rates.control_dt()
    }

    /// Advances one control tick. `live` replaces the scripted human when
    /// given; a live session passes zero when no input is fresh.
    pub fn step(&mut self, live: Option<PlanarWrench>) -> Result<StepReport> {
        if self.is_finished() {
            return Err(Error::Config("trial already finished".into()));
        }
        let rates = self.config.profile.rates;
        let idle_threshold = self.config.profile.intent.idle_threshold;
        let k = self.k;
        let dt = rates.control_dt();
        let t = k as f64 * dt;
        let events_before = self.log.events.len();
        let plant = *self.tray.state();

        // 1. human
        let f_human = match (live, self.human.as_mut()) {
            (Some(w), _) => w,
            (None, Some(h)) => human_step(
                &h.params,
                &mut h.state,
                &plant.pose,
                &plant.twist,
                &self.action.f_act,
                &self.goals,
                dt,
                &mut self.rng_human,
            ),
            (None, None) => PlanarWrench::ZERO,
        };
        if !self.grasped && f_human.magnitude() > idle_threshold {
            self.grasped = true;
            self.log.events.push(Event { t, kind: EventKind::GraspBeep });
        }

        // 2. sensing
        let f_sensor = self.sensors.tick(k, t, f_human, &mut self.rng_sensor);

        // 3. intent
        let mut features = None;
        let mut estimate = None;
        if k.is_multiple_of(rates.ticks_per_intent()) {
            let obs = extract_features(
                &plant.pose,
                &plant.twist,
                &f_sensor,
                &self.action.f_act,
                &self.goals,
                idle_threshold,
            )?;
            if let Observation::Active(x) = obs {
                features = Some(x);
            }
            let p = self.recognizer.observe(&obs, t);
            self.latest_estimate = p.estimate;
            estimate = Some(p.estimate);
        }
        let perception = self.recognizer.current();

        // 4. arrival and HLC
        let arrived = goal_check(&plant.pose, &self.goals);
        let stretch = (f_sensor - self.action.f_act).magnitude();
        let mut hlc_tick = None;
        if k.is_multiple_of(rates.ticks_per_hlc()) || arrived.is_some() {
            let inputs = HlcInputs {
                t,
                pose: plant.pose,
                twist: plant.twist,
                label: perception.filtered,
                committed: perception.committed,
                leading: perception.leading,
                stretch,
                arrived,
            };
            let (s, out) = self.hlc.step(&self.hlc_state, &inputs, &mut self.rng_hlc);
            if s.phase == Phase::Abort && !self.aborting {
                self.aborting = true;
                self.log.events.push(Event { t, kind: EventKind::AbortStarted });
            }
            self.hlc_state = s;
            self.hlc_out = out;
            let rec = HlcTraceRecord {
                t,
                machine: s.machine,
                phase: s.phase,
                active_goal: s.active_goal,
                f_mag: s.f_mag,
                stretch,
                intent_label: perception.filtered,
            };
            self.log.hlc_trace.push(rec);
            hlc_tick = Some(rec);
        }

        // 5. action force toward the current goal direction
        let p = &self.config.profile;
        match self.hlc_out.goal_direction_target.map(|g| self.goals.direction_to(&plant.pose, g)) {
            Some(Ok(dir)) if self.hlc_out.ramping => self.action.set_reference_raw(dir, self.hlc_out.magnitude),
            Some(Ok(dir)) => self.action.set_reference(dir, self.hlc_out.magnitude, p.sampler.f_min, p.sampler.f_max),
            _ => self.action.clear_reference(),
        }
        if self.hlc_out.terminated.is_some() {
            self.action.clear_reference();
        }
        let f_act = self.action.step(dt, arrived.is_some() || self.hlc_out.terminated.is_some());

        // 6. admittance and plant
        if self.hlc_out.terminated.is_some() {
            self.tray.halt();
        }
        self.tray.step(f_act, f_sensor);

        if self.config.record == RecordLevel::Full {
            self.log.records.push(TickRecord {
                k,
                t,
                pose: plant.pose,
                twist: plant.twist,
                f_human,
                f_sensor,
                f_act,
                f_ref: self.action.f_ref,
                stretch,
                features,
                estimate,
                label: perception.filtered,
                committed: perception.committed,
                hlc: hlc_tick,
            });
        }

        self.k += 1;
        if let Some(kind) = self.hlc_out.terminated {
            let (status, goal) = match kind {
                Termination::Aborted => (OutcomeStatus::Aborted, None),
                Termination::Nominal | Termination::Forced => (OutcomeStatus::Goal, arrived),
            };
            if goal.is_some() {
                self.log.events.push(Event { t, kind: EventKind::GoalBeep });
            }
            self.finish(Outcome { status, goal, termination: Some(kind), duration: t, final_pose: plant.pose });
        } else if self.k >= self.max_ticks {
            let end = self.k as f64 * dt;
            self.finish(Outcome {
                status: OutcomeStatus::Timeout,
                goal: None,
                termination: None,
                duration: end,
                final_pose: self.tray.state().pose,
            });
        }

        Ok(StepReport {
            k,
            t,
            pose: plant.pose,
            twist: plant.twist,
            f_human,
            f_sensor,
            f_act,
            stretch,
            hlc: self.hlc_state,
            posteriors: self.latest_estimate.posteriors,
            label: perception.filtered,
            new_events: self.log.events.len() - events_before,
            finished: self.is_finished(),
        })
    }

    fn finish(&mut self, outcome: Outcome) {
        self.tray.halt();
        self.log.outcome = Some(outcome);
    }
}

/// Applies the profile's per-trial spread to the scripted human.
fn randomize_human(p: &Profile, a: GoalAssignment, rng: &mut ChaCha8Rng) -> HumanParams {
    use rand::Rng;
    let mut params = p.human.params_for(a.commitment()).with_assignment(a);
    let fs = p.human.force_spread;
    let ds = p.human.delay_spread;
    params.nominal_force *= 1.0 + rng.random_range(-fs..=fs);
    params.reaction_delay *= 1.0 + rng.random_range(-ds..=ds);
    params
}

/// Runs one trial to completion.
pub fn run_trial(config: &TrialConfig, model: &LdaModel) -> Result<TrialLog> {
    if config.human == HumanSide::Live {
        return Err(Error::Config("run_trial needs a scripted human".into()));
    }
    let mut sim = Simulation::new(config.clone(), model.clone())?;
    while !sim.is_finished() {
        sim.step(None)?;
    }
    Ok(sim.into_log())
}

/// Convenience used by tests and the CLI: human commitment, robot role and
/// goals in one call with the default profile's trained model.
pub fn quick_trial(robot: RobotRole, human: GoalAssignment, seed: u64) -> Result<TrialLog> {
    let config = TrialConfig::new(robot, human, seed);
    let model = default_model(&config.profile)?;
    run_trial(&config, &model)
}

/// Robot machine a role starts in, for reporting.
pub fn initial_machine(role: RobotRole) -> Machine {
    match role {
        RobotRole::Kcg(_) => Machine::Kcg,
        RobotRole::Hard(_) => Machine::Hard,
        RobotRole::Soft(_) => Machine::Soft,
        RobotRole::Follower => Machine::Follower,
    }
}

/// Robot role from a commitment and goal, the way a trial assigns it.
pub fn robot_role(a: GoalAssignment) -> RobotRole {
    match (a.commitment(), a.goal_index()) {
        (Commitment::Hard, Some(g)) => RobotRole::Hard(g),
        (Commitment::Soft, Some(g)) => RobotRole::Soft(g),
        _ => RobotRole::Follower,
    }
}
