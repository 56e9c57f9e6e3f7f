//! Hierarchical physical human-robot negotiation over a shared planar object.
//!
//! Layers, bottom up:
//!
//! * [`dynamics`]: admittance law driving a simulated tray
//! * [`action`]: the robot's action force and its strength sampler
//! * [`intent`]: force features, discriminant classifier and accumulators
//! * [`hlc`]: Known Common Goal, Follower, Hard and Soft state machines
//! * [`human`]: scripted partners for closed-loop evaluation
//! * [`harness`]: the multi-rate trial loop, logs, metrics and batches

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod hlc;
pub mod human;
pub mod intent;
pub mod profile;
pub mod signal;

pub use error::{Error, Result};
pub use geometry::{Commitment, GoalAssignment, GoalSet, PlanarAccel, PlanarPose, PlanarTwist, PlanarWrench, Vec2};
pub use harness::{run_trial, HumanSide, Simulation, TrialConfig, TrialLog};
pub use hlc::RobotRole;
pub use profile::Profile;
