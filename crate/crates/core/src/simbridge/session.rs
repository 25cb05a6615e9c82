use super::protocol::{ProtocolMessage, TestConfig};
use crate::monitor::{Trace, TraceBuilder};

/// How an episode ended.
#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeOutcome {
    Completed(Trace),
    /// The simulator reported an error.
    Error(String),
    /// The session broke the `init step+ (done|error)` contract.
    ProtocolViolation(String),
    /// No complete session within the per-episode timeout.
    Timeout,
}

impl EpisodeOutcome {
    pub fn trace(&self) -> Option<&Trace> {
        match self {
            EpisodeOutcome::Completed(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    AwaitInit,
    Stepping,
    Closed,
}

/// Server-side acceptor for the frames a simulator sends back during one
/// episode. Accepts exactly `init step+ (done | error)`.
#[derive(Debug)]
pub struct Session {
    episode: u64,
    state: State,
    trace: TraceBuilder,
}

/// Result of feeding one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Progress {
    Continue,
    Finished(EpisodeOutcome),
}

impl Session {
    pub fn new(config: &TestConfig) -> Self {
        Self {
            episode: config.episode,
            state: State::AwaitInit,
            trace: TraceBuilder::default(),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.state == State::Closed
    }

    /// Feeds one received frame. A violation closes the session and is
    /// returned as `Finished(ProtocolViolation)`.
    pub fn feed(&mut self, msg: ProtocolMessage) -> Progress {
        match self.advance(msg) {
            Ok(p) => p,
            Err(why) => {
                self.state = State::Closed;
                Progress::Finished(EpisodeOutcome::ProtocolViolation(why))
            }
        }
    }

    fn advance(&mut self, msg: ProtocolMessage) -> Result<Progress, String> {
        match (self.state, msg) {
            (State::Closed, m) => Err(format!("`{}` received after the session ended", m.kind())),
            (State::AwaitInit, ProtocolMessage::Init { config }) => {
                if config.episode != self.episode {
                    return Err(format!(
                        "init acknowledges episode {} but episode {} was sent",
                        config.episode, self.episode
                    ));
                }
                self.state = State::Stepping;
                Ok(Progress::Continue)
            }
            (State::AwaitInit, m) => Err(format!("`{}` received before init", m.kind())),
            (State::Stepping, ProtocolMessage::Init { .. }) => Err("duplicate init".into()),
            (State::Stepping, ProtocolMessage::Step { t, signals }) => {
                self.trace.push(t, &signals).map_err(|e| e.to_string())?;
                Ok(Progress::Continue)
            }
            (State::Stepping, ProtocolMessage::Done { .. }) => {
                if self.trace.is_empty() {
                    return Err("done without any step".into());
                }
                self.state = State::Closed;
                let trace = std::mem::take(&mut self.trace).finish().map_err(|e| e.to_string())?;
                Ok(Progress::Finished(EpisodeOutcome::Completed(trace)))
            }
            (State::Stepping, ProtocolMessage::Error { message }) => {
                if self.trace.is_empty() {
                    return Err(format!("error before any step: {message}"));
                }
                self.state = State::Closed;
                Ok(Progress::Finished(EpisodeOutcome::Error(message)))
            }
        }
    }
}
