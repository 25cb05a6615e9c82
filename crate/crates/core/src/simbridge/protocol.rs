use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::BridgeError;
use crate::monitor::{Trace, TraceBuilder};
use crate::scenario::FeatureVector;
use crate::value::Value;

pub type Signals = BTreeMap<String, f64>;

/// Everything a simulator needs to run one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub episode: u64,
    /// Named values to set in the simulator before the episode starts.
    pub features: IndexMap<String, Value>,
    /// Episode length in seconds.
    pub duration: f64,
    /// Sampling period in seconds.
    pub period: f64,
    /// Seed for any randomness inside the simulator.
    #[serde(default)]
    pub seed: u64,
    /// Opaque mode switches passed through to the simulator.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub flags: BTreeMap<String, String>,
}

impl TestConfig {
    pub fn new(episode: u64, features: &FeatureVector, duration: f64, period: f64, seed: u64) -> Self {
        Self {
            episode,
            features: features.values.clone(),
            duration,
            period,
            seed,
            flags: BTreeMap::new(),
        }
    }

    pub fn with_flag(mut self, key: &str, value: &str) -> Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn validate(&self) -> Result<(), BridgeError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(BridgeError::InvalidConfig(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(BridgeError::InvalidConfig(format!("period must be positive, got {}", self.period)));
        }
        if let Some((k, _)) = self.features.iter().find(|(_, v)| matches!(v, Value::Real(x) if !x.is_finite())) {
            return Err(BridgeError::InvalidConfig(format!("feature `{k}` is not finite")));
        }
        Ok(())
    }

    /// Sample instants `k * period` for `k = 0 ..= floor(duration / period)`.
    pub fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        let steps = (self.duration / self.period + 1e-9).floor() as u64;
        (0..=steps).map(move |k| k as f64 * self.period)
    }
}

/// One frame of the wire protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProtocolMessage {
    /// Sent by the server to start an episode; echoed back by the client
    /// as its acknowledgement.
    Init { config: TestConfig },
    Step { t: f64, signals: Signals },
    Done { status: String },
    Error { message: String },
}

impl ProtocolMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolMessage::Init { .. } => "init",
            ProtocolMessage::Step { .. } => "step",
            ProtocolMessage::Done { .. } => "done",
            ProtocolMessage::Error { .. } => "error",
        }
    }

    fn check_finite(&self) -> Result<(), BridgeError> {
        match self {
            ProtocolMessage::Step { t, signals } => {
                if !t.is_finite() {
                    return Err(BridgeError::NonFinite("t".into()));
                }
                if let Some((k, _)) = signals.iter().find(|(_, v)| !v.is_finite()) {
                    return Err(BridgeError::NonFinite(format!("signal `{k}`")));
                }
                Ok(())
            }
            ProtocolMessage::Init { config } => {
                let bad = |x: f64| !x.is_finite();
                if bad(config.duration) || bad(config.period) {
                    return Err(BridgeError::NonFinite("config timing".into()));
                }
                if let Some((k, _)) = config.features.iter().find(|(_, v)| matches!(v, Value::Real(x) if bad(*x))) {
                    return Err(BridgeError::NonFinite(format!("feature `{k}`")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Encodes one frame: a JSON object followed by a newline.
pub fn encode(msg: &ProtocolMessage) -> Result<String, BridgeError> {
    msg.check_finite()?;
    let mut s = serde_json::to_string(msg).map_err(|e| BridgeError::Malformed(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Decodes one frame; trailing newline optional.
pub fn decode(line: &str) -> Result<ProtocolMessage, BridgeError> {
    let raw: serde_json::Value =
        serde_json::from_str(line.trim_end_matches(['\n', '\r'])).map_err(|e| BridgeError::Malformed(e.to_string()))?;
    let kind = raw
        .get("type")
        .ok_or_else(|| BridgeError::Framing("missing `type` field".into()))?
        .as_str()
        .ok_or_else(|| BridgeError::Framing("`type` must be a string".into()))?;
    if !matches!(kind, "init" | "step" | "done" | "error") {
        return Err(BridgeError::UnknownType(kind.to_string()));
    }
    let msg: ProtocolMessage = serde_json::from_value(raw).map_err(|e| BridgeError::Framing(e.to_string()))?;
    msg.check_finite()?;
    Ok(msg)
}

/// Serializes a trace as step frames, one per sample.
pub fn trace_to_jsonl(trace: &Trace) -> Result<String, BridgeError> {
    let mut out = String::new();
    for (i, t) in trace.times().iter().enumerate() {
        out.push_str(&encode(&ProtocolMessage::Step {
            t: *t,
            signals: trace.sample(i),
        })?);
    }
    Ok(out)
}

/// Reads a trace from step frames. `init` and `done` frames are skipped so
/// that recorded session transcripts load directly.
pub fn trace_from_jsonl(text: &str) -> Result<Trace, BridgeError> {
    let mut b = TraceBuilder::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match decode(line)? {
            ProtocolMessage::Step { t, signals } => b.push(t, &signals)?,
            ProtocolMessage::Error { message } => return Err(BridgeError::Simulator(message)),
            ProtocolMessage::Init { .. } | ProtocolMessage::Done { .. } => {}
        }
    }
    Ok(b.finish()?)
}
