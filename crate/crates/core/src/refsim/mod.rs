//! Reference taxiing simulator: unicycle plant at constant speed, a
//! proportional steering controller and a perception stub with injectable
//! faults.
//!
//! Monitored signals are always ground truth: `cte` (m, signed), `he`
//! (degrees), `s` (m along the runway) and `off_runway` (0 or 1).

mod perception;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use perception::{perceive, Bias, Condition, FaultProfile, FaultRule, Noise, PerceptionMode, Source};

use crate::monitor::{Trace, TraceBuilder};
use crate::simbridge::{EpisodeSimulator, Signals, TestConfig};
use crate::value::Value;

pub const RUNWAY_LENGTH: f64 = 2866.0;
pub const OFF_RUNWAY_CTE: f64 = 30.0;
pub const MAX_HEADING: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub s: f64,
    pub cte: f64,
    /// Degrees, positive to the right of the centerline direction.
    pub he: f64,
}

impl PlantState {
    pub fn off_runway(&self) -> bool {
        self.cte.abs() > OFF_RUNWAY_CTE
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxiParams {
    /// Ground speed, m/s.
    pub speed: f64,
    /// Heading change per unit steering per second.
    pub c_turn: f64,
    pub k_p: f64,
    pub k_h: f64,
    /// Steering saturation, degrees.
    pub u_max: f64,
}

impl Default for TaxiParams {
    fn default() -> Self {
        Self {
            speed: 5.0,
            c_turn: 1.0,
            k_p: 2.7,
            k_h: 0.8,
            u_max: 25.0,
        }
    }
}

/// Steering command in degrees.
pub fn control(cte_est: f64, he_est: f64, p: &TaxiParams) -> f64 {
    (-p.k_p * cte_est - p.k_h * he_est).clamp(-p.u_max, p.u_max)
}

pub fn step(state: &PlantState, steering: f64, dt: f64, p: &TaxiParams) -> PlantState {
    let he = (state.he + steering * dt * p.c_turn).clamp(-MAX_HEADING, MAX_HEADING);
    let rad = he.to_radians();
    PlantState {
        he,
        cte: state.cte + p.speed * rad.sin() * dt,
        s: (state.s + p.speed * rad.cos() * dt).clamp(0.0, RUNWAY_LENGTH),
    }
}

fn real_feature(features: &IndexMap<String, Value>, name: &str) -> Result<f64, String> {
    match features.get(name) {
        None => Ok(0.0),
        Some(Value::Real(x)) => Ok(*x),
        Some(Value::Tag(t)) => Err(format!("feature `{name}` must be numeric, got tag `{t}`")),
    }
}

/// Initial state from features `s0`, `cte0`, `he0` (each defaulting to 0).
pub fn initial_state(features: &IndexMap<String, Value>) -> Result<PlantState, String> {
    Ok(PlantState {
        s: real_feature(features, "s0")?.clamp(0.0, RUNWAY_LENGTH),
        cte: real_feature(features, "cte0")?,
        he: real_feature(features, "he0")?.clamp(-MAX_HEADING, MAX_HEADING),
    })
}

/// Resolves the perception mode for one episode from its flags:
/// `perception=ground-truth|stub`, `shadows=on|off`, `disable=a,b`.
pub fn mode_for(config: &TestConfig, profile: &FaultProfile) -> Result<PerceptionMode, String> {
    let mut disabled: Vec<&str> = Vec::new();
    for (k, v) in &config.flags {
        match (k.as_str(), v.as_str()) {
            ("perception", "ground-truth") => return Ok(PerceptionMode::GroundTruth),
            ("perception", "stub") | ("shadows", "on") => {}
            ("shadows", "off") => disabled.push("shadow"),
            ("disable", list) => disabled.extend(list.split(',').map(str::trim).filter(|s| !s.is_empty())),
            _ => return Err(format!("unsupported flag {k}={v}")),
        }
    }
    // shadows=off is a no-op for profiles without a shadow rule
    if !profile.rules.iter().any(|r| r.name == "shadow") {
        disabled.retain(|n| *n != "shadow");
    }
    disabled.sort_unstable();
    disabled.dedup();
    Ok(PerceptionMode::Stub(profile.clone().without(&disabled)?))
}

/// Refsim as an [`EpisodeSimulator`], usable in-process or behind a TCP
/// client.
#[derive(Debug, Clone)]
pub struct TaxiSim {
    pub params: TaxiParams,
    pub profile: FaultProfile,
    episode: Option<Episode>,
}

#[derive(Debug, Clone)]
struct Episode {
    state: PlantState,
    mode: PerceptionMode,
    features: IndexMap<String, Value>,
    rng: ChaCha8Rng,
    t: f64,
    dt: f64,
}

impl TaxiSim {
    pub fn new(profile: FaultProfile) -> Self {
        Self {
            params: TaxiParams::default(),
            profile,
            episode: None,
        }
    }

    pub fn with_params(mut self, params: TaxiParams) -> Self {
        self.params = params;
        self
    }
}

impl Default for TaxiSim {
    fn default() -> Self {
        Self::new(FaultProfile::default_profile())
    }
}

fn signals(s: &PlantState) -> Signals {
    [
        ("cte".to_string(), s.cte),
        ("he".to_string(), s.he),
        ("off_runway".to_string(), if s.off_runway() { 1.0 } else { 0.0 }),
        ("s".to_string(), s.s),
    ]
    .into_iter()
    .collect()
}

impl Episode {
    fn new(config: &TestConfig, mode: PerceptionMode) -> Result<Self, String> {
        Ok(Self {
            state: initial_state(&config.features)?,
            mode,
            features: config.features.clone(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            t: 0.0,
            dt: config.period,
        })
    }

    /// Advances in whole periods up to `t` and returns the signals there.
    fn sample(&mut self, t: f64, params: &TaxiParams) -> Signals {
        while self.t + self.dt * 0.5 < t {
            let (cte, he) = perceive(&self.mode, &self.state, &self.features, self.t, &mut self.rng);
            self.state = step(&self.state, control(cte, he, params), self.dt, params);
            self.t += self.dt;
        }
        signals(&self.state)
    }
}

impl EpisodeSimulator for TaxiSim {
    fn start(&mut self, config: &TestConfig) -> Result<(), String> {
        let mode = mode_for(config, &self.profile)?;
        self.episode = Some(Episode::new(config, mode)?);
        Ok(())
    }

    fn sample(&mut self, t: f64) -> Result<Signals, String> {
        let ep = self.episode.as_mut().ok_or("sample before start")?;
        Ok(ep.sample(t, &self.params))
    }
}

/// Runs one episode directly under `mode`, ignoring perception flags.
pub fn run_episode(config: &TestConfig, mode: PerceptionMode) -> Result<Trace, String> {
    config.validate().map_err(|e| e.to_string())?;
    let params = TaxiParams::default();
    let mut ep = Episode::new(config, mode)?;
    let mut b = TraceBuilder::default();
    for t in config.sample_times() {
        b.push(t, &ep.sample(t, &params)).map_err(|e| e.to_string())?;
    }
    b.finish().map_err(|e| e.to_string())
}
