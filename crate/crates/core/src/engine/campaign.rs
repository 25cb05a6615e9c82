use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::Instant;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::table::{ResultRow, ResultTable, RowSink, Verdict};
use super::EngineError;
use crate::monitor::{parse_spec, robustness, Formula};
use crate::refsim::{FaultProfile, TaxiParams, TaxiSim};
use crate::samplers::{DistributionReport, DomainSpec, Feedback, Sampler, SamplerChoice};
use crate::scenario::{parse_scenario, sample, FixedExternals, Sample, ScenarioError, ScenarioProgram, DEFAULT_MAX_REJECTS};
use crate::simbridge::{EpisodeOutcome, InProcess, SimulatorTarget, TcpOptions, TcpTarget, TestConfig};
use crate::value::Value;

pub const DEFAULT_DURATION: f64 = 30.0;
pub const DEFAULT_PERIOD: f64 = 0.1;

/// Makes one simulator connection per worker.
pub trait TargetFactory: Sync {
    fn make(&self) -> Result<Box<dyn SimulatorTarget + Send>, EngineError>;
}

impl<F> TargetFactory for F
where
    F: Fn() -> Box<dyn SimulatorTarget + Send> + Sync,
{
    fn make(&self) -> Result<Box<dyn SimulatorTarget + Send>, EngineError> {
        Ok(self())
    }
}

/// The in-process reference simulator.
#[derive(Debug, Clone)]
pub struct BuiltinTarget {
    pub profile: FaultProfile,
    pub params: TaxiParams,
}

impl Default for BuiltinTarget {
    fn default() -> Self {
        Self {
            profile: FaultProfile::default_profile(),
            params: TaxiParams::default(),
        }
    }
}

impl TargetFactory for BuiltinTarget {
    fn make(&self) -> Result<Box<dyn SimulatorTarget + Send>, EngineError> {
        Ok(Box::new(InProcess::new(
            TaxiSim::new(self.profile.clone()).with_params(self.params),
        )))
    }
}

impl TargetFactory for TcpTarget {
    fn make(&self) -> Result<Box<dyn SimulatorTarget + Send>, EngineError> {
        Ok(Box::new(self.clone()))
    }
}

#[derive(Debug, Clone)]
pub enum TargetSpec {
    Builtin(BuiltinTarget),
    /// Listen on `bind` and wait for simulators to connect.
    Tcp { bind: String, options: TcpOptions },
}

#[derive(Debug, Clone)]
pub struct CampaignOptions {
    pub max_episodes: u64,
    pub stop_on_first: bool,
    /// Worker count; forced to 1 for adaptive samplers.
    pub parallelism: usize,
    pub seed: u64,
    /// Episode length; falls back to the scenario's `meta duration`, then 30 s.
    pub duration: Option<f64>,
    /// Sample period; falls back to `meta period`, then 0.1 s.
    pub period: Option<f64>,
    /// Passed to the simulator with every episode.
    pub flags: BTreeMap<String, String>,
    pub max_rejects: usize,
    /// When false, `wall_ms` is written as 0 so tables are reproducible
    /// byte for byte.
    pub record_wall_time: bool,
    /// JSON-lines file the rows are appended to as they complete.
    pub output: Option<PathBuf>,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            max_episodes: 100,
            stop_on_first: false,
            parallelism: 1,
            seed: 0,
            duration: None,
            period: None,
            flags: BTreeMap::new(),
            max_rejects: DEFAULT_MAX_REJECTS,
            record_wall_time: true,
            output: None,
        }
    }
}

impl CampaignOptions {
    fn timing(&self, program: Option<&ScenarioProgram>) -> Result<(f64, f64), EngineError> {
        let meta = |key: &str| -> Result<Option<f64>, EngineError> {
            match program.and_then(|p| p.metadata().get(key)) {
                None => Ok(None),
                Some(v) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| EngineError::Config(format!("meta {key} = {v} is not a number"))),
            }
        };
        let duration = match self.duration {
            Some(d) => d,
            None => meta("duration")?.unwrap_or(DEFAULT_DURATION),
        };
        let period = match self.period {
            Some(p) => p,
            None => meta("period")?.unwrap_or(DEFAULT_PERIOD),
        };
        Ok((duration, period))
    }
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub scenario: PathBuf,
    pub spec: PathBuf,
    pub sampler: SamplerChoice,
    pub target: TargetSpec,
    pub options: CampaignOptions,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub table: ResultTable,
    /// Learned distribution, for adaptive samplers.
    pub report: Option<DistributionReport>,
    pub stopped_early: bool,
    pub parallelism: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the scenario draws of `episode`; the simulator gets a seed
/// derived from it so the two streams are independent.
pub fn episode_seed(campaign_seed: u64, episode: u64) -> u64 {
    splitmix64(campaign_seed ^ splitmix64(episode))
}

fn simulator_seed(scenario_seed: u64) -> u64 {
    splitmix64(scenario_seed ^ 0x5EED_0F_5111)
}

fn read(path: &Path) -> Result<String, EngineError> {
    std::fs::read_to_string(path)
        .map_err(|e| EngineError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Loads the scenario and specification, then runs the campaign.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult, EngineError> {
    let program = parse_scenario(&read(&config.scenario)?)?;
    let spec = parse_spec(read(&config.spec)?.trim())?;
    let domain = DomainSpec::from_externals(&program.externals())?;
    let mut sampler = config.sampler.build(domain, config.options.seed)?;
    match &config.target {
        TargetSpec::Builtin(b) => run_campaign_with(&program, &spec, sampler.as_mut(), b, &config.options),
        TargetSpec::Tcp { bind, options } => {
            let target = TcpTarget::bind(bind.as_str(), options.clone())?;
            let out = run_campaign_with(&program, &spec, sampler.as_mut(), &target, &config.options);
            target.shutdown();
            out
        }
    }
}

enum Work {
    Ready(ResultRow),
    Run(TestConfig),
}

/// Runs a campaign with an already-built sampler and simulator factory.
///
/// Rows come out in episode order whatever the parallelism, and each row's
/// outcome reaches the sampler exactly once, in that order.
pub fn run_campaign_with(
    program: &ScenarioProgram,
    spec: &Formula,
    sampler: &mut dyn Sampler,
    factory: &dyn TargetFactory,
    options: &CampaignOptions,
) -> Result<CampaignResult, EngineError> {
    if options.max_episodes == 0 {
        return Err(EngineError::Config("max episodes must be at least 1".into()));
    }
    if options.parallelism == 0 {
        return Err(EngineError::Config("parallelism must be at least 1".into()));
    }
    let externals = program.externals();
    if sampler.domain().len() != externals.len() {
        return Err(EngineError::Config(format!(
            "sampler has {} dimensions but the scenario has {} external parameters",
            sampler.domain().len(),
            externals.len()
        )));
    }
    let (duration, period) = options.timing(Some(program))?;
    let base = TestConfig {
        episode: 0,
        features: IndexMap::new(),
        duration,
        period,
        seed: 0,
        flags: options.flags.clone(),
    };
    base.validate()?;
    let parallelism = if sampler.is_adaptive() { 1 } else { options.parallelism };

    let sampler = RefCell::new(sampler);
    let points: RefCell<HashMap<u64, Vec<Value>>> = RefCell::new(HashMap::new());
    let mut sampler_rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut next_episode = 0u64;

    let next_work = || -> Option<Result<Work, EngineError>> {
        if next_episode >= options.max_episodes {
            return None;
        }
        let episode = next_episode;
        next_episode += 1;
        let point = sampler.borrow_mut().next_point(&mut sampler_rng);
        let scenario_seed = episode_seed(options.seed, episode);
        let sim_seed = simulator_seed(scenario_seed);
        let mut ext = FixedExternals::new(point.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed);
        let drawn = sample(program, &mut ext, &mut rng, options.max_rejects);
        let external_features = || -> IndexMap<String, Value> {
            externals.iter().map(|p| p.name.clone()).zip(point.iter().cloned()).collect()
        };
        let blank = |verdict, features, message| ResultRow {
            episode,
            features,
            rho: None,
            verdict,
            seed: sim_seed,
            wall_ms: 0,
            off_runway: None,
            message,
        };
        let work = match drawn {
            Ok(Sample::Accepted(fv)) => Work::Run(TestConfig {
                episode,
                features: fv.values,
                seed: sim_seed,
                ..base.clone()
            }),
            Ok(Sample::Rejected { attempts, .. }) => Work::Ready(blank(
                Verdict::Rejected,
                external_features(),
                Some(format!("all {attempts} attempts violated a require")),
            )),
            Err(e @ (ScenarioError::ExternalArity { .. } | ScenarioError::ExternalDomainViolation { .. })) => {
                return Some(Err(e.into()))
            }
            Err(e) => Work::Ready(blank(Verdict::Error, external_features(), Some(e.to_string()))),
        };
        points.borrow_mut().insert(episode, point);
        Some(Ok(work))
    };

    let mut sink = RowSink::create(options.output.as_deref())?;
    let mut rows = Vec::new();
    let mut stopped_early = false;
    let on_row = |row: ResultRow| -> Result<bool, EngineError> {
        let point = points.borrow_mut().remove(&row.episode).expect("point recorded");
        let feedback = match row.rho {
            Some(r) => Feedback::Robustness(r),
            None => Feedback::Rejected,
        };
        sampler.borrow_mut().record_feedback(&point, feedback);
        sink.append(&row)?;
        let stop = options.stop_on_first && row.verdict == Verdict::Falsified;
        rows.push(row);
        if stop {
            stopped_early = true;
        }
        Ok(!stop)
    };

    execute(spec, factory, parallelism, options.record_wall_time, next_work, on_row)?;
    let report = sampler.borrow().distribution_report().ok();
    Ok(CampaignResult {
        table: ResultTable { rows },
        report,
        stopped_early,
        parallelism,
    })
}

/// Simulator changes applied when replaying rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Override {
    None,
    GroundTruth,
    NoShadow,
}

impl Override {
    fn apply(self, flags: &mut BTreeMap<String, String>) {
        match self {
            Override::None => {}
            Override::GroundTruth => {
                flags.insert("perception".into(), "ground-truth".into());
            }
            Override::NoShadow => {
                flags.insert("shadows".into(), "off".into());
            }
        }
    }
}

/// Re-runs the given rows with their recorded features and seeds.
/// Rows without a full feature vector (rejected ones) are skipped.
pub fn replay(
    rows: &[ResultRow],
    spec: &Formula,
    factory: &dyn TargetFactory,
    options: &CampaignOptions,
    program: Option<&ScenarioProgram>,
    override_: Override,
) -> Result<ResultTable, EngineError> {
    let (duration, period) = options.timing(program)?;
    let mut flags = options.flags.clone();
    override_.apply(&mut flags);
    let mut todo = rows.iter().filter(|r| r.verdict != Verdict::Rejected);
    let next_work = || {
        todo.next().map(|r| {
            let c = TestConfig {
                episode: r.episode,
                features: r.features.clone(),
                duration,
                period,
                seed: r.seed,
                flags: flags.clone(),
            };
            c.validate()?;
            Ok(Work::Run(c))
        })
    };
    let mut sink = RowSink::create(options.output.as_deref())?;
    let mut out = Vec::new();
    let on_row = |row: ResultRow| {
        sink.append(&row)?;
        out.push(row);
        Ok(true)
    };
    execute(spec, factory, options.parallelism.max(1), options.record_wall_time, next_work, on_row)?;
    Ok(ResultTable { rows: out })
}

fn run_one(
    target: &mut dyn SimulatorTarget,
    spec: &Formula,
    config: &TestConfig,
    record_wall: bool,
) -> Result<ResultRow, EngineError> {
    let started = Instant::now();
    let outcome = target.run(config)?;
    let mut row = ResultRow {
        episode: config.episode,
        features: config.features.clone(),
        rho: None,
        verdict: Verdict::Error,
        seed: config.seed,
        wall_ms: 0,
        off_runway: None,
        message: None,
    };
    match outcome {
        EpisodeOutcome::Completed(trace) => {
            row.off_runway = trace.signal("off_runway").map(|s| s.iter().any(|v| *v > 0.5));
            match robustness(spec, &trace) {
                Ok(r) => {
                    row.rho = Some(r.value());
                    row.verdict = Verdict::from_rho(r.value());
                }
                Err(e) => row.message = Some(e.to_string()),
            }
        }
        EpisodeOutcome::Timeout => row.verdict = Verdict::Timeout,
        EpisodeOutcome::Error(m) => row.message = Some(m),
        EpisodeOutcome::ProtocolViolation(m) => row.message = Some(format!("protocol violation: {m}")),
    }
    if record_wall {
        row.wall_ms = started.elapsed().as_millis() as u64;
    }
    Ok(row)
}

/// Pulls work until exhausted, runs it on `parallelism` simulators and
/// hands rows to `on_row` in submission order until it returns false.
fn execute<N, R>(
    spec: &Formula,
    factory: &dyn TargetFactory,
    parallelism: usize,
    record_wall: bool,
    mut next_work: N,
    mut on_row: R,
) -> Result<(), EngineError>
where
    N: FnMut() -> Option<Result<Work, EngineError>>,
    R: FnMut(ResultRow) -> Result<bool, EngineError>,
{
    if parallelism == 1 {
        let mut target = factory.make()?;
        while let Some(work) = next_work() {
            let row = match work? {
                Work::Ready(row) => row,
                Work::Run(c) => run_one(target.as_mut(), spec, &c, record_wall)?,
            };
            if !on_row(row)? {
                break;
            }
        }
        return Ok(());
    }

    let targets = (0..parallelism).map(|_| factory.make()).collect::<Result<Vec<_>, _>>()?;
    let stop = AtomicBool::new(false);
    thread::scope(|scope| {
        let (job_tx, job_rx) = mpsc::sync_channel::<(u64, TestConfig)>(parallelism);
        let job_rx = Arc::new(Mutex::new(job_rx));
        let (res_tx, res_rx) = mpsc::channel::<(u64, Result<ResultRow, EngineError>)>();
        for mut target in targets {
            let (job_rx, res_tx, stop) = (job_rx.clone(), res_tx.clone(), &stop);
            scope.spawn(move || loop {
                let job = job_rx.lock().unwrap().recv();
                let Ok((seq, config)) = job else { break };
                if stop.load(Ordering::SeqCst) {
                    continue;
                }
                let row = run_one(target.as_mut(), spec, &config, record_wall);
                if res_tx.send((seq, row)).is_err() {
                    break;
                }
            });
        }
        drop(res_tx);

        let result = (|| -> Result<(), EngineError> {
            let mut pending: BTreeMap<u64, ResultRow> = BTreeMap::new();
            let (mut submitted, mut emitted, mut in_flight) = (0u64, 0u64, 0usize);
            let mut exhausted = false;
            loop {
                while !exhausted && in_flight < 2 * parallelism {
                    match next_work() {
                        None => exhausted = true,
                        Some(w) => {
                            match w? {
                                Work::Ready(row) => {
                                    pending.insert(submitted, row);
                                }
                                Work::Run(c) => {
                                    job_tx.send((submitted, c)).expect("workers alive");
                                    in_flight += 1;
                                }
                            }
                            submitted += 1;
                        }
                    }
                    // emit eagerly so ready rows do not wait behind the window
                    while let Some(row) = pending.remove(&emitted) {
                        emitted += 1;
                        if !on_row(row)? {
                            return Ok(());
                        }
                    }
                }
                if exhausted && in_flight == 0 && pending.is_empty() {
                    return Ok(());
                }
                let (seq, row) = res_rx
                    .recv()
                    .map_err(|_| EngineError::Config("simulation workers exited".into()))?;
                in_flight -= 1;
                pending.insert(seq, row?);
                while let Some(row) = pending.remove(&emitted) {
                    emitted += 1;
                    if !on_row(row)? {
                        return Ok(());
                    }
                }
            }
        })();
        stop.store(true, Ordering::SeqCst);
        drop(job_tx);
        result
    })
}
