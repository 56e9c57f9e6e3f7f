//! Messages exchanged over a session's web socket.
//!
//! Each message is one JSON text frame: an envelope with the schema version,
//! the session id and a sequence number, flattened together with a body
//! tagged by `type`.

use negotiate_core::harness::{Event, OutcomeStatus};
use negotiate_core::hlc::{Machine, Phase, Termination};
use negotiate_core::{PlanarPose, PlanarTwist, PlanarWrench, RobotRole};
use serde::{Deserialize, Serialize};

pub const WIRE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub v: u32,
    pub session: String,
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    // client to server
    /// Starts the session's clock.
    Join,
    /// Replaces the robot role, seed or pacing and restarts the trial.
    /// Absent fields keep their current value.
    SetConfig {
        #[serde(default)]
        robot: Option<RobotRole>,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        speed: Option<f64>,
    },
    /// Translational force applied by the live human, N.
    HumanForce {
        fx: f64,
        fy: f64,
    },
    Pause {
        paused: bool,
    },
    /// Restarts the trial at the start pose. Without a seed the next one
    /// after the current seed is used.
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },

    // server to client
    SessionSnapshot(Snapshot),
    Outcome(OutcomeReport),
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl Body {
    /// True for the messages a client may send.
    pub fn is_client(&self) -> bool {
        matches!(
            self,
            Body::Join | Body::SetConfig { .. } | Body::HumanForce { .. } | Body::Pause { .. } | Body::Reset { .. }
        )
    }
}

/// Everything needed to draw one frame. No field depends on an earlier
/// snapshot, except `events` which lists what happened since the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub pose: PlanarPose,
    pub twist: PlanarTwist,
    pub f_act: PlanarWrench,
    pub f_human: PlanarWrench,
    pub machine: Machine,
    pub phase: Phase,
    pub active_goal: Option<usize>,
    pub posteriors: [f64; 3],
    /// Stretch force magnitude, N.
    pub f_str: f64,
    pub events: Vec<Event>,
    pub paused: bool,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub status: OutcomeStatus,
    pub goal: Option<usize>,
    pub termination: Option<Termination>,
    pub duration: f64,
    pub final_pose: PlanarPose,
    pub robot: RobotRole,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not JSON, or not a known client message.
    Malformed,
    /// Schema version other than [`WIRE_SCHEMA_VERSION`].
    Version,
    /// Session id does not match the connection's session.
    Session,
    /// Sequence number not above the previous client message's.
    Sequence,
    /// Rejected configuration or force value.
    Invalid,
}

impl WireMessage {
    pub fn new(session: impl Into<String>, seq: u64, body: Body) -> Self {
        Self { v: WIRE_SCHEMA_VERSION, session: session.into(), seq, body }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn is_snapshot(&self) -> bool {
        matches!(self.body, Body::SessionSnapshot(_))
    }
}
