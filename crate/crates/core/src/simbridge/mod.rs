//! Connection between the falsifier and a simulator.
//!
//! Frames are newline-delimited JSON objects tagged by `type`. See
//! `PROTOCOL.md` at the repository root for the wire format. The same
//! frames are used whether the simulator runs in-process or over TCP, so
//! both paths go through [`Session`] and yield bitwise identical traces.

mod client;
mod inprocess;
mod protocol;
mod session;
mod tcp;

use thiserror::Error;

pub use client::run_client;
pub use inprocess::{drive_episode, EpisodeSimulator, InProcess};
pub use protocol::{decode, encode, trace_from_jsonl, trace_to_jsonl, ProtocolMessage, Signals, TestConfig};
pub use session::{EpisodeOutcome, Progress, Session};
pub use tcp::{TcpOptions, TcpTarget, DEFAULT_EPISODE_TIMEOUT};

use crate::monitor::MonitorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    #[error("invalid test configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("simulator error: {0}")]
    Simulator(String),
    #[error("simulator unreachable: {0}")]
    Unreachable(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Trace(#[from] MonitorError),
}

impl From<std::io::Error> for BridgeError {
    fn from(e: std::io::Error) -> Self {
        BridgeError::Io(e.to_string())
    }
}

/// Something that can run one episode per test configuration.
pub trait SimulatorTarget {
    /// Runs one episode. Simulator failures, protocol violations and
    /// timeouts come back as an [`EpisodeOutcome`]; `Err` means the
    /// simulator could not be reached at all.
    fn run(&mut self, config: &TestConfig) -> Result<EpisodeOutcome, BridgeError>;
}

impl<T: SimulatorTarget + ?Sized> SimulatorTarget for Box<T> {
    fn run(&mut self, config: &TestConfig) -> Result<EpisodeOutcome, BridgeError> {
        (**self).run(config)
    }
}
