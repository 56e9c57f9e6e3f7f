//! Live sessions: a person plays the human side of a trial over a web
//! socket while the robot runs its full controller stack.
//!
//! [`Session`] holds the protocol and the simulation and knows nothing about
//! sockets; [`server`] wires sessions to axum.

pub mod queue;
pub mod server;
pub mod session;
pub mod wire;

pub use queue::OutboundQueue;
pub use server::{router, serve, ServerOptions};
pub use session::{Session, SNAPSHOT_HZ, STALE_AFTER};
pub use wire::{Body, ErrorCode, OutcomeReport, Snapshot, WireMessage, WIRE_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error(transparent)]
    Core(#[from] negotiate_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
