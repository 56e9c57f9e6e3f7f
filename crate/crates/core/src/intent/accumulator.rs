use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::features::GOAL_COUNT;

/// Per-tick classifier verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntentLabel {
    #[default]
    Idle,
    Goal(usize),
}

impl IntentLabel {
    pub fn goal(self) -> Option<usize> {
        match self {
            IntentLabel::Idle => None,
            IntentLabel::Goal(g) => Some(g),
        }
    }

    pub fn is_idle(self) -> bool {
        self == IntentLabel::Idle
    }
}

/// Classifier output at one intent tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentEstimate {
    pub label: IntentLabel,
    /// Class posteriors; uniform when idle.
    pub posteriors: [f64; GOAL_COUNT],
    pub t: f64,
}

impl IntentEstimate {
    pub fn idle(t: f64) -> Self {
        Self { label: IntentLabel::Idle, posteriors: [1.0 / GOAL_COUNT as f64; GOAL_COUNT], t }
    }
}

/// Sliding window of recent non-idle labels. Commits to a goal once the
/// window is full and one goal holds a strict majority.
///
/// The window length is rounded down to an even sample count so that two
/// labels taking turns always tie instead of one edging ahead by a sample.
#[derive(Debug, Clone)]
pub struct IntentAccumulator {
    window: VecDeque<(f64, usize)>,
    capacity: usize,
    commit_duration: f64,
}

impl IntentAccumulator {
    /// `rate_hz` is the rate estimates arrive at; the window holds
    /// `commit_duration · rate_hz` samples, rounded down to even.
    pub fn new(commit_duration: f64, rate_hz: f64) -> Self {
        let n = (commit_duration * rate_hz + 1e-9).floor() as usize;
        let capacity = (n - n % 2).max(2);
        Self { window: VecDeque::with_capacity(capacity + 1), capacity, commit_duration }
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }

    pub fn accumulate(&mut self, est: &IntentEstimate) -> Option<usize> {
        if let IntentLabel::Goal(g) = est.label {
            while let Some(&(t0, _)) = self.window.front() {
                if est.t - t0 >= self.commit_duration - 1e-9 || self.window.len() >= self.capacity {
                    self.window.pop_front();
                } else {
                    break;
                }
            }
            self.window.push_back((est.t, g));
        }
        self.committed()
    }

    fn counts(&self) -> [usize; GOAL_COUNT] {
        let mut counts = [0; GOAL_COUNT];
        for &(_, g) in &self.window {
            if g < GOAL_COUNT {
                counts[g] += 1;
            }
        }
        counts
    }

    /// Goal with a strict majority over a full window, if any.
    pub fn committed(&self) -> Option<usize> {
        if self.window.len() < self.capacity {
            return None;
        }
        let counts = self.counts();
        counts.iter().position(|c| 2 * c > self.window.len())
    }

    /// Most frequent goal currently in the window (lowest index on ties).
    pub fn leading(&self) -> Option<usize> {
        if self.window.is_empty() {
            return None;
        }
        let counts = self.counts();
        let mut best = 0;
        for (i, c) in counts.iter().enumerate() {
            if *c > counts[best] {
                best = i;
            }
        }
        Some(best)
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }
}

/// Passes a label change through only after it has persisted for `hold`.
#[derive(Debug, Clone)]
pub struct LabelHysteresis {
    hold: f64,
    current: IntentLabel,
    candidate: Option<(IntentLabel, f64)>,
}

impl LabelHysteresis {
    pub fn new(hold: f64) -> Self {
        Self { hold, current: IntentLabel::Idle, candidate: None }
    }

    pub fn update(&mut self, label: IntentLabel, t: f64) -> IntentLabel {
        if label == self.current {
            self.candidate = None;
        } else {
            match self.candidate {
                Some((c, since)) if c == label => {
                    if t - since >= self.hold - 1e-9 {
                        self.current = label;
                        self.candidate = None;
                    }
                }
                _ => self.candidate = Some((label, t)),
            }
        }
        self.current
    }

    pub fn current(&self) -> IntentLabel {
        self.current
    }
}
