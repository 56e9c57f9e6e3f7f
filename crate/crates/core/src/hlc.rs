//! High-level controller: the Known Common Goal, Follower, Hard Goal and Soft
//! Goal state machines.
//!
//! Every machine is a pure transition `(state, inputs) → (state', output)`
//! evaluated at the HLC rate. The output names the goal the action force
//! should point at and the reference magnitude.
//!
//! Transition reconstruction, per machine:
//!
//! * KCG: constant magnitude toward the agreed goal. Arrival at that goal is a
//!   nominal termination, arrival at any other goal a forced one.
//! * Follower: no goal and no force while perceiving. When the intent
//!   accumulator commits to a goal the machine becomes KCG for that goal with
//!   a magnitude drawn at the KCG strength levels.
//! * Hard: starts perceiving while already pushing toward its goal. The first
//!   non-idle label picks Agreement or Disagreement. Disagreement (label names
//!   another goal) escalates the magnitude at a rate scaled by the speed
//!   deficit toward the goal; Agreement (same goal or idle) de-escalates. Once
//!   in Agreement with the accumulator committed to the robot goal it hands
//!   over to KCG.
//! * Soft: Hard, plus Attempt-Human-Goal. Stretch above the conflict threshold
//!   held through Disagreement for the trigger time retargets the robot to the
//!   perceived human goal. A confirming label in AHG hands over to KCG; AHG
//!   disagreement past the timeout falls back to Follower.
//! * Abort: stretch above the abort threshold in any machine that is applying
//!   force ramps the magnitude linearly to zero, then terminates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ControllerRole, ForceSampler};
use crate::error::{Error, Result};
use crate::geometry::{GoalSet, PlanarPose, PlanarTwist};
use crate::intent::IntentLabel;

/// Thresholds, rates and timers of the state machines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HlcConfig {
    /// Stretch level that, sustained in Disagreement, triggers AHG (Soft only), N.
    pub f_conflict_threshold: f64,
    /// Stretch level that triggers the safety abort, N.
    pub f_abort: f64,
    /// Escalation rate at zero progress toward the goal, N/s.
    pub escalation_rate_max: f64,
    /// De-escalation rate in Agreement, N/s.
    pub deescalation_rate: f64,
    pub ahg_timeout: f64,
    pub ahg_trigger_hold: f64,
    pub abort_ramp: f64,
    pub tick_hz: f64,
    /// Speed toward the goal at which escalation stops, m/s.
    pub desired_speed: f64,
}

impl Default for HlcConfig {
    fn default() -> Self {
        Self {
            f_conflict_threshold: 20.0,
            f_abort: 30.0,
            escalation_rate_max: 6.0,
            deescalation_rate: 4.0,
            ahg_timeout: 3.0,
            ahg_trigger_hold: 0.3,
            abort_ramp: 1.0,
            tick_hz: 50.0,
            desired_speed: 0.4,
        }
    }
}

impl HlcConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.escalation_rate_max,
            self.deescalation_rate,
            self.ahg_timeout,
            self.abort_ramp,
            self.tick_hz,
            self.desired_speed,
        ];
        if !(self.f_conflict_threshold > 0.0 && self.f_conflict_threshold < self.f_abort) {
            return Err(Error::Config("conflict threshold must be positive and below the abort threshold".into()));
        }
        if rates.iter().any(|r| !(*r > 0.0)) || self.ahg_trigger_hold < 0.0 {
            return Err(Error::Config("HLC rates and timers must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz
    }
}

/// The robot's assigned role for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", content = "goal", rename_all = "snake_case")]
pub enum RobotRole {
    Kcg(usize),
    Hard(usize),
    Soft(usize),
    Follower,
}

impl RobotRole {
    pub fn goal(&self) -> Option<usize> {
        match *self {
            RobotRole::Kcg(g) | RobotRole::Hard(g) | RobotRole::Soft(g) => Some(g),
            RobotRole::Follower => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Machine {
    Kcg,
    Follower,
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Perceiving,
    Agreement,
    Disagreement,
    AhgAgreement,
    AhgDisagreement,
    Abort,
    NominalTermination,
    ForcedTermination,
}

impl Phase {
    /// True for either agreement phase.
    pub fn is_agreement(self) -> bool {
        matches!(self, Phase::Agreement | Phase::AhgAgreement)
    }

    pub fn is_disagreement(self) -> bool {
        matches!(self, Phase::Disagreement | Phase::AhgDisagreement)
    }

    pub fn is_ahg(self) -> bool {
        matches!(self, Phase::AhgAgreement | Phase::AhgDisagreement)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Nominal,
    Forced,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlcState {
    pub machine: Machine,
    pub phase: Phase,
    pub active_goal: Option<usize>,
    pub f_mag: f64,
    pub phase_entry_time: f64,
    /// Time stretch first exceeded the conflict threshold in the current
    /// Disagreement run.
    pub stretch_since: Option<f64>,
    /// Magnitude at the moment the abort ramp started.
    pub abort_from: f64,
    pub terminated: Option<Termination>,
}

impl HlcState {
    fn enter(&mut self, phase: Phase, t: f64) {
        if self.phase != phase {
            self.phase = phase;
            self.phase_entry_time = t;
        }
        if phase != Phase::Disagreement {
            self.stretch_since = None;
        }
    }

    fn terminate(&mut self, kind: Termination, t: f64) {
        let phase = match kind {
            Termination::Nominal => Phase::NominalTermination,
            Termination::Forced => Phase::ForcedTermination,
            Termination::Aborted => Phase::Abort,
        };
        self.enter(phase, t);
        self.f_mag = 0.0;
        self.terminated = Some(kind);
    }

    pub fn is_terminal(&self) -> bool {
        self.terminated.is_some()
    }
}

/// Reference handed to the action-force block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlcOutput {
    pub goal_direction_target: Option<usize>,
    pub magnitude: f64,
    pub terminated: Option<Termination>,
    /// True while the abort ramp is running; the magnitude is then not clipped.
    pub ramping: bool,
}

/// Per-tick observations consumed by the machines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlcInputs {
    pub t: f64,
    pub pose: PlanarPose,
    pub twist: PlanarTwist,
    /// Hysteresis-filtered intent label.
    pub label: IntentLabel,
    /// Goal the accumulator has committed to, if any.
    pub committed: Option<usize>,
    /// Goal currently leading in the accumulator window.
    pub leading: Option<usize>,
    /// ‖F_H − F_act‖, N.
    pub stretch: f64,
    /// Goal site the tray is inside, if any.
    pub arrived: Option<usize>,
}

/// The state machines with their configuration.
#[derive(Debug, Clone)]
pub struct Hlc {
    cfg: HlcConfig,
    sampler: ForceSampler,
    goals: GoalSet,
}

impl Hlc {
    pub fn new(cfg: HlcConfig, sampler: ForceSampler, goals: GoalSet) -> Result<Self> {
        cfg.validate()?;
        sampler.validate()?;
        Ok(Self { cfg, sampler, goals })
    }

    pub fn config(&self) -> &HlcConfig {
        &self.cfg
    }

    pub fn sampler(&self) -> &ForceSampler {
        &self.sampler
    }

    pub fn goals(&self) -> &GoalSet {
        &self.goals
    }

    /// Initial state for a role. Goal-directed machines draw their starting
    /// magnitude; the Follower starts without goal or force.
    pub fn init<R: Rng + ?Sized>(&self, role: RobotRole, t: f64, rng: &mut R) -> Result<HlcState> {
        if let Some(g) = role.goal() {
            if g >= self.goals.len() {
                return Err(Error::GoalIndex { index: g, len: self.goals.len() });
            }
        }
        let (machine, phase, f_mag) = match role {
            RobotRole::Kcg(_) => {
                (Machine::Kcg, Phase::Agreement, self.sampler.sample_magnitude(ControllerRole::Kcg, rng))
            }
            RobotRole::Hard(_) => {
                (Machine::Hard, Phase::Perceiving, self.sampler.sample_magnitude(ControllerRole::Hard, rng))
            }
            RobotRole::Soft(_) => {
                (Machine::Soft, Phase::Perceiving, self.sampler.sample_magnitude(ControllerRole::Soft, rng))
            }
            RobotRole::Follower => (Machine::Follower, Phase::Perceiving, 0.0),
        };
        Ok(HlcState {
            machine,
            phase,
            active_goal: role.goal(),
            f_mag,
            phase_entry_time: t,
            stretch_since: None,
            abort_from: 0.0,
            terminated: None,
        })
    }

    /// Output implied by a state without advancing it.
    pub fn output(&self, s: &HlcState) -> HlcOutput {
        match s.terminated {
            Some(kind) => {
                HlcOutput { goal_direction_target: None, magnitude: 0.0, terminated: Some(kind), ramping: false }
            }
            None => HlcOutput {
                goal_direction_target: s.active_goal,
                magnitude: if s.active_goal.is_some() { s.f_mag } else { 0.0 },
                terminated: None,
                ramping: s.phase == Phase::Abort,
            },
        }
    }

    /// One HLC tick for whichever machine is active.
    pub fn step<R: Rng + ?Sized>(&self, s: &HlcState, inp: &HlcInputs, rng: &mut R) -> (HlcState, HlcOutput) {
        if s.is_terminal() {
            return (*s, self.output(s));
        }
        if s.phase == Phase::Abort {
            return self.abort_step(s, inp);
        }
        match s.machine {
            Machine::Kcg => self.kcg_step(s, inp),
            Machine::Follower => self.follower_step(s, inp, rng),
            Machine::Hard => self.hard_step(s, inp),
            Machine::Soft => self.soft_step(s, inp),
        }
    }

    fn dt(&self) -> f64 {
        self.cfg.dt()
    }

    /// Arrival rule shared by every machine: the active goal ends nominally,
    /// any other site is a forced termination.
    fn arrival(&self, s: &mut HlcState, inp: &HlcInputs) -> bool {
        match inp.arrived {
            Some(g) => {
                let kind = if s.active_goal == Some(g) { Termination::Nominal } else { Termination::Forced };
                s.terminate(kind, inp.t);
                true
            }
            None => false,
        }
    }

    fn check_abort(&self, s: &mut HlcState, inp: &HlcInputs) -> bool {
        if inp.stretch > self.cfg.f_abort {
            s.abort_from = s.f_mag;
            s.enter(Phase::Abort, inp.t);
            true
        } else {
            false
        }
    }

    fn abort_step(&self, s: &HlcState, inp: &HlcInputs) -> (HlcState, HlcOutput) {
        let mut n = *s;
        let remaining = 1.0 - (inp.t - s.phase_entry_time) / self.cfg.abort_ramp;
        if remaining <= 1e-9 || inp.arrived.is_some() {
            n.terminate(Termination::Aborted, inp.t);
        } else {
            n.f_mag = s.abort_from * remaining;
        }
        (n, self.output(&n))
    }

    pub fn kcg_step(&self, s: &HlcState, inp: &HlcInputs) -> (HlcState, HlcOutput) {
        let mut n = *s;
        if !self.arrival(&mut n, inp) && !self.check_abort(&mut n, inp) {
            n.enter(Phase::Agreement, inp.t);
        }
        (n, self.output(&n))
    }

    pub fn follower_step<R: Rng + ?Sized>(&self, s: &HlcState, inp: &HlcInputs, rng: &mut R) -> (HlcState, HlcOutput) {
        let mut n = *s;
        if self.arrival(&mut n, inp) {
            return (n, self.output(&n));
        }
        n.f_mag = 0.0;
        n.active_goal = None;
        if let Some(g) = inp.committed {
            n.machine = Machine::Kcg;
            n.active_goal = Some(g);
            n.f_mag = self.sampler.sample_magnitude(ControllerRole::Kcg, rng);
            n.enter(Phase::Agreement, inp.t);
        } else {
            n.enter(Phase::Perceiving, inp.t);
        }
        (n, self.output(&n))
    }

    /// Speed of the tray toward the active goal.
    fn speed_toward_goal(&self, s: &HlcState, inp: &HlcInputs) -> f64 {
        s.active_goal
            .and_then(|g| self.goals.direction_to(&inp.pose, g).ok())
            .map_or(0.0, |d| inp.twist.linear().dot(d))
    }

    fn escalate(&self, s: &mut HlcState, v_goal: f64) {
        let deficit = 1.0 - (v_goal / self.cfg.desired_speed).clamp(0.0, 1.0);
        s.f_mag = (s.f_mag + self.cfg.escalation_rate_max * deficit * self.dt()).min(self.sampler.f_max);
    }

    fn deescalate(&self, s: &mut HlcState) {
        s.f_mag = (s.f_mag - self.cfg.deescalation_rate * self.dt()).max(self.sampler.f_min);
    }

    /// Agreement/disagreement cycle shared by Hard and Soft outside AHG.
    fn negotiate(&self, n: &mut HlcState, inp: &HlcInputs) {
        let goal = n.active_goal;
        let conflict = matches!(inp.label, IntentLabel::Goal(g) if Some(g) != goal);
        if n.phase == Phase::Perceiving && inp.label.is_idle() {
            return;
        }
        if conflict {
            let v_goal = self.speed_toward_goal(n, inp);
            n.enter(Phase::Disagreement, inp.t);
            self.escalate(n, v_goal);
        } else {
            n.enter(Phase::Agreement, inp.t);
            self.deescalate(n);
            if inp.committed.is_some() && inp.committed == goal {
                n.machine = Machine::Kcg;
            }
        }
    }

    pub fn hard_step(&self, s: &HlcState, inp: &HlcInputs) -> (HlcState, HlcOutput) {
        let mut n = *s;
        if !self.arrival(&mut n, inp) && !self.check_abort(&mut n, inp) {
            self.negotiate(&mut n, inp);
        }
        (n, self.output(&n))
    }

    pub fn soft_step(&self, s: &HlcState, inp: &HlcInputs) -> (HlcState, HlcOutput) {
        let mut n = *s;
        if self.arrival(&mut n, inp) || self.check_abort(&mut n, inp) {
            return (n, self.output(&n));
        }
        if n.phase.is_ahg() {
            self.ahg_step(&mut n, inp);
            return (n, self.output(&n));
        }
        self.negotiate(&mut n, inp);
        if n.phase == Phase::Disagreement && n.machine == Machine::Soft {
            if inp.stretch > self.cfg.f_conflict_threshold {
                let since = *n.stretch_since.get_or_insert(inp.t);
                if inp.t - since >= self.cfg.ahg_trigger_hold - 1e-9 {
                    self.enter_ahg(&mut n, inp);
                }
            } else {
                n.stretch_since = None;
            }
        }
        (n, self.output(&n))
    }

    /// Retargets to the perceived human goal.
    fn enter_ahg(&self, n: &mut HlcState, inp: &HlcInputs) {
        let own = n.active_goal;
        let human = inp.leading.filter(|g| Some(*g) != own).or(inp.label.goal()).filter(|g| Some(*g) != own);
        let Some(human) = human else { return };
        n.active_goal = Some(human);
        n.stretch_since = None;
        let phase = if inp.label == IntentLabel::Goal(human) { Phase::AhgAgreement } else { Phase::AhgDisagreement };
        n.phase = phase;
        n.phase_entry_time = inp.t;
    }

    fn ahg_step(&self, n: &mut HlcState, inp: &HlcInputs) {
        let goal = n.active_goal;
        match inp.label {
            IntentLabel::Goal(g) if Some(g) == goal => {
                n.machine = Machine::Kcg;
                n.enter(Phase::Agreement, inp.t);
                self.deescalate(n);
            }
            IntentLabel::Goal(_) => {
                let v_goal = self.speed_toward_goal(n, inp);
                n.enter(Phase::AhgDisagreement, inp.t);
                self.escalate(n, v_goal);
                if inp.t - n.phase_entry_time > self.cfg.ahg_timeout {
                    n.machine = Machine::Follower;
                    n.active_goal = None;
                    n.f_mag = 0.0;
                    n.enter(Phase::Perceiving, inp.t);
                }
            }
            IntentLabel::Idle => {
                n.enter(Phase::AhgAgreement, inp.t);
                self.deescalate(n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DT: f64 = 0.02;

    fn hlc() -> Hlc {
        Hlc::new(HlcConfig::default(), ForceSampler::default(), GoalSet::default()).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(9)
    }

    fn inputs(t: f64, label: IntentLabel) -> HlcInputs {
        HlcInputs {
            t,
            pose: PlanarPose::new(0.0, 0.1, 0.0),
            twist: PlanarTwist::ZERO,
            label,
            committed: None,
            leading: label.goal(),
            stretch: 0.0,
            arrived: None,
        }
    }

    fn state(machine: Machine, phase: Phase, goal: Option<usize>, f_mag: f64) -> HlcState {
        HlcState {
            machine,
            phase,
            active_goal: goal,
            f_mag,
            phase_entry_time: 0.0,
            stretch_since: None,
            abort_from: 0.0,
            terminated: None,
        }
    }

    #[test]
    fn kcg_terminates_nominally_at_its_goal() {
        let h = hlc();
        let s = state(Machine::Kcg, Phase::Agreement, Some(1), 5.0);
        let (n, out) = h.kcg_step(&s, &HlcInputs { arrived: Some(1), ..inputs(1.0, IntentLabel::Idle) });
        assert_eq!(n.phase, Phase::NominalTermination);
        assert_eq!(out.magnitude, 0.0);
        assert_eq!(out.terminated, Some(Termination::Nominal));
    }

    #[test]
    fn kcg_forced_at_other_goal() {
        let h = hlc();
        let s = state(Machine::Kcg, Phase::Agreement, Some(1), 5.0);
        let (n, out) = h.kcg_step(&s, &HlcInputs { arrived: Some(2), ..inputs(1.0, IntentLabel::Idle) });
        assert_eq!(n.phase, Phase::ForcedTermination);
        assert_eq!(out.magnitude, 0.0);
    }

    #[test]
    fn kcg_en_route_holds_magnitude() {
        let h = hlc();
        let s = state(Machine::Kcg, Phase::Agreement, Some(1), 5.0);
        let (n, out) = h.kcg_step(&s, &inputs(1.0, IntentLabel::Goal(0)));
        assert_eq!(n.phase, Phase::Agreement);
        assert_eq!(out.magnitude, 5.0);
        assert_eq!(out.goal_direction_target, Some(1));
    }

    #[test]
    fn follower_delegates_on_commitment() {
        let h = hlc();
        let s = h.init(RobotRole::Follower, 0.0, &mut rng()).unwrap();
        let (n, out) = h.follower_step(&s, &inputs(0.5, IntentLabel::Goal(1)), &mut rng());
        assert_eq!((n.phase, out.magnitude), (Phase::Perceiving, 0.0));
        let (n, out) =
            h.follower_step(&n, &HlcInputs { committed: Some(1), ..inputs(0.6, IntentLabel::Goal(1)) }, &mut rng());
        assert_eq!(n.machine, Machine::Kcg);
        assert_eq!(n.active_goal, Some(1));
        assert!((3.0..=15.0).contains(&out.magnitude));
        // the partner overpowers to another site
        let (n, out) = h.step(&n, &HlcInputs { arrived: Some(2), ..inputs(2.0, IntentLabel::Goal(2)) }, &mut rng());
        assert_eq!(n.phase, Phase::ForcedTermination);
        assert_eq!(out.terminated, Some(Termination::Forced));
    }

    #[test]
    fn hard_escalates_in_disagreement() {
        let h = hlc();
        let s = state(Machine::Hard, Phase::Disagreement, Some(0), 10.0);
        let (n, _) = h.hard_step(&s, &inputs(1.0, IntentLabel::Goal(1)));
        assert_eq!(n.phase, Phase::Disagreement);
        assert!((n.f_mag - 10.12).abs() < 1e-12);
    }

    #[test]
    fn escalation_slows_with_progress() {
        let h = hlc();
        let s = state(Machine::Hard, Phase::Disagreement, Some(1), 10.0);
        // moving toward g2 (index 1) at half the desired speed
        let inp = HlcInputs { twist: PlanarTwist::new(0.0, 0.2, 0.0), ..inputs(1.0, IntentLabel::Goal(0)) };
        let (n, _) = h.hard_step(&s, &inp);
        assert!((n.f_mag - (10.0 + 6.0 * 0.5 * DT)).abs() < 1e-9);
    }

    #[test]
    fn hard_deescalates_in_agreement() {
        let h = hlc();
        let s = state(Machine::Hard, Phase::Disagreement, Some(0), 10.0);
        let (n, _) = h.hard_step(&s, &inputs(1.0, IntentLabel::Goal(0)));
        assert_eq!(n.phase, Phase::Agreement);
        assert!((n.f_mag - (10.0 - 4.0 * DT)).abs() < 1e-12);
        assert_eq!(n.phase_entry_time, 1.0);
    }

    #[test]
    fn hard_aborts_on_excess_stretch() {
        let h = hlc();
        let s = state(Machine::Hard, Phase::Disagreement, Some(0), 12.0);
        let (n, out) = h.hard_step(&s, &HlcInputs { stretch: 35.0, ..inputs(1.0, IntentLabel::Goal(1)) });
        assert_eq!(n.phase, Phase::Abort);
        assert!(out.ramping);
        // linear ramp to zero over one second
        let (n, out) = h.step(&n, &inputs(1.5, IntentLabel::Goal(1)), &mut rng());
        assert!((out.magnitude - 6.0).abs() < 1e-9);
        let (n, out) = h.step(&n, &inputs(2.0, IntentLabel::Goal(1)), &mut rng());
        assert_eq!(out.terminated, Some(Termination::Aborted));
        assert_eq!(n.terminated, Some(Termination::Aborted));
    }

    #[test]
    fn hard_starts_perceiving_and_hands_over_to_kcg() {
        let h = hlc();
        let s = h.init(RobotRole::Hard(0), 0.0, &mut rng()).unwrap();
        assert_eq!(s.phase, Phase::Perceiving);
        assert!(h.output(&s).magnitude >= 3.0);
        let (s, _) = h.hard_step(&s, &inputs(0.1, IntentLabel::Idle));
        assert_eq!(s.phase, Phase::Perceiving);
        let (s, _) = h.hard_step(&s, &inputs(0.2, IntentLabel::Goal(0)));
        assert_eq!((s.machine, s.phase), (Machine::Hard, Phase::Agreement));
        let (s, _) = h.hard_step(&s, &HlcInputs { committed: Some(0), ..inputs(0.3, IntentLabel::Goal(0)) });
        assert_eq!((s.machine, s.phase), (Machine::Kcg, Phase::Agreement));
    }

    #[test]
    fn soft_enters_ahg_after_sustained_stretch() {
        let h = hlc();
        let mut s = state(Machine::Soft, Phase::Disagreement, Some(0), 12.0);
        let mut t = 1.0;
        let mut entered = None;
        for _ in 0..40 {
            let inp = HlcInputs { stretch: 22.0, leading: Some(2), ..inputs(t, IntentLabel::Goal(2)) };
            s = h.soft_step(&s, &inp).0;
            if s.phase.is_ahg() && entered.is_none() {
                entered = Some(t);
            }
            t += DT;
        }
        let entered = entered.expect("AHG never triggered");
        assert!((entered - 1.3).abs() < 1e-9, "{entered}");
        assert_eq!(s.active_goal, Some(2));
    }

    #[test]
    fn soft_stays_put_below_conflict_threshold() {
        let h = hlc();
        let mut s = state(Machine::Soft, Phase::Disagreement, Some(0), 12.0);
        for k in 0..200 {
            let inp = HlcInputs { stretch: 19.5, ..inputs(1.0 + k as f64 * DT, IntentLabel::Goal(2)) };
            s = h.soft_step(&s, &inp).0;
        }
        assert_eq!((s.phase, s.active_goal), (Phase::Disagreement, Some(0)));
    }

    #[test]
    fn ahg_times_out_to_follower() {
        let h = hlc();
        let mut s = state(Machine::Soft, Phase::AhgDisagreement, Some(2), 10.0);
        s.phase_entry_time = 1.0;
        let mut t = 1.0;
        while t < 4.1 {
            s = h.step(&s, &inputs(t, IntentLabel::Goal(1)), &mut rng()).0;
            t += DT;
        }
        assert_eq!((s.machine, s.phase, s.active_goal), (Machine::Follower, Phase::Perceiving, None));
        assert_eq!(h.output(&s).magnitude, 0.0);
    }

    #[test]
    fn ahg_confirmation_hands_over_to_kcg() {
        let h = hlc();
        let s = state(Machine::Soft, Phase::AhgDisagreement, Some(2), 10.0);
        let (n, out) = h.step(&s, &inputs(1.0, IntentLabel::Goal(2)), &mut rng());
        assert_eq!((n.machine, n.phase, n.active_goal), (Machine::Kcg, Phase::Agreement, Some(2)));
        assert_eq!(out.goal_direction_target, Some(2));
    }

    #[test]
    fn terminal_states_are_absorbing() {
        let h = hlc();
        let mut s = state(Machine::Hard, Phase::Agreement, Some(0), 5.0);
        s.terminate(Termination::Forced, 1.0);
        let (n, out) = h.step(
            &s,
            &HlcInputs { stretch: 50.0, committed: Some(1), ..inputs(2.0, IntentLabel::Goal(2)) },
            &mut rng(),
        );
        assert_eq!(n, s);
        assert_eq!(out.terminated, Some(Termination::Forced));
    }

    #[test]
    fn follower_role_has_no_goal() {
        let s = hlc().init(RobotRole::Follower, 0.0, &mut rng()).unwrap();
        assert_eq!(s.active_goal, None);
        assert!(hlc().init(RobotRole::Hard(7), 0.0, &mut rng()).is_err());
    }
}
