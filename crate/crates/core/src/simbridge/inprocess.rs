use super::protocol::{decode, encode, ProtocolMessage, Signals, TestConfig};
use super::session::{EpisodeOutcome, Progress, Session};
use super::{BridgeError, SimulatorTarget};

/// The simulator side of the protocol: configure, then sample at each
/// requested instant.
pub trait EpisodeSimulator {
    fn start(&mut self, config: &TestConfig) -> Result<(), String>;
    /// Signals at time `t`. Called with strictly increasing `t` starting at 0.
    fn sample(&mut self, t: f64) -> Result<Signals, String>;
}

impl<S: EpisodeSimulator + ?Sized> EpisodeSimulator for Box<S> {
    fn start(&mut self, config: &TestConfig) -> Result<(), String> {
        (**self).start(config)
    }

    fn sample(&mut self, t: f64) -> Result<Signals, String> {
        (**self).sample(t)
    }
}

/// Emits the client's half of one session: the init echo, one step per
/// sample time, then `done` (or `error` if the simulator fails).
pub fn drive_episode<F>(sim: &mut dyn EpisodeSimulator, config: &TestConfig, mut emit: F) -> Result<(), BridgeError>
where
    F: FnMut(ProtocolMessage) -> Result<(), BridgeError>,
{
    if let Err(e) = config.validate().map_err(|e| e.to_string()).and_then(|_| sim.start(config)) {
        return emit(ProtocolMessage::Error { message: e });
    }
    emit(ProtocolMessage::Init { config: config.clone() })?;
    for t in config.sample_times() {
        match sim.sample(t) {
            Ok(signals) => emit(ProtocolMessage::Step { t, signals })?,
            Err(message) => return emit(ProtocolMessage::Error { message }),
        }
    }
    emit(ProtocolMessage::Done { status: "ok".into() })
}

/// Runs an [`EpisodeSimulator`] in the current thread. Frames still go
/// through encoding and the session checks, so results match a TCP run.
#[derive(Debug, Clone, Default)]
pub struct InProcess<S> {
    pub sim: S,
}

impl<S: EpisodeSimulator> InProcess<S> {
    pub fn new(sim: S) -> Self {
        Self { sim }
    }
}

impl<S: EpisodeSimulator> SimulatorTarget for InProcess<S> {
    fn run(&mut self, config: &TestConfig) -> Result<EpisodeOutcome, BridgeError> {
        let mut session = Session::new(config);
        let mut outcome = None;
        let result = drive_episode(&mut self.sim, config, |msg| {
            if outcome.is_some() {
                return Ok(());
            }
            let msg = match encode(&msg).and_then(|line| decode(&line)) {
                Ok(m) => m,
                Err(e) => {
                    outcome = Some(EpisodeOutcome::ProtocolViolation(e.to_string()));
                    return Ok(());
                }
            };
            if let Progress::Finished(o) = session.feed(msg) {
                outcome = Some(o);
            }
            Ok(())
        });
        result?;
        Ok(outcome.unwrap_or_else(|| EpisodeOutcome::ProtocolViolation("session did not finish".into())))
    }
}
