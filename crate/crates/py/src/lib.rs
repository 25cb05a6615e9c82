//! Python bindings: scenario sampling, robustness, the reference simulator
//! and whole campaigns.

use std::collections::BTreeMap;
use std::path::PathBuf;

use falsify_core::engine::{
    binned_stats, export_training_configs, run_campaign, BuiltinTarget, CampaignConfig, CampaignOptions, ResultRow,
    ResultTable, TargetSpec,
};
use falsify_core::monitor::{self, parse_spec, Formula, Trace};
use falsify_core::refsim::{mode_for, run_episode as refsim_episode, FaultProfile};
use falsify_core::samplers::{CeParams, SamplerChoice};
use falsify_core::scenario::{self, FixedExternals, Sample, ScenarioProgram};
use falsify_core::simbridge::TestConfig;
use falsify_core::Value;
use indexmap::IndexMap;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Real(x) => x.into_pyobject(py)?.into_any(),
        Value::Tag(s) => s.into_pyobject(py)?.into_any(),
    })
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(Value::Tag(s));
    }
    Ok(Value::Real(obj.extract::<f64>()?))
}

fn features_to_dict<'py>(py: Python<'py>, f: &IndexMap<String, Value>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in f {
        d.set_item(k, to_py(py, v)?)?;
    }
    Ok(d)
}

fn row_to_dict<'py>(py: Python<'py>, r: &ResultRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("episode", r.episode)?;
    d.set_item("features", features_to_dict(py, &r.features)?)?;
    d.set_item("rho", r.rho)?;
    d.set_item("verdict", r.verdict.as_str())?;
    d.set_item("seed", r.seed)?;
    d.set_item("wall_ms", r.wall_ms)?;
    d.set_item("off_runway", r.off_runway)?;
    d.set_item("message", r.message.as_deref())?;
    Ok(d)
}

fn trace_to_dict<'py>(py: Python<'py>, tr: &Trace) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", tr.times().to_vec())?;
    for name in tr.names() {
        d.set_item(name, tr.signal(name).unwrap_or_default().to_vec())?;
    }
    Ok(d)
}

fn spec_formula(spec: &str) -> PyResult<Formula> {
    match monitor::presets::by_name(spec) {
        Some(f) => Ok(f),
        None => parse_spec(spec).map_err(value_err),
    }
}

fn build_trace(times: Vec<f64>, signals: &Bound<'_, PyDict>) -> PyResult<Trace> {
    let mut cols = Vec::new();
    for (k, v) in signals.iter() {
        cols.push((k.extract::<String>()?, v.extract::<Vec<f64>>()?));
    }
    Trace::from_columns(times, cols).map_err(value_err)
}

/// A parsed scenario program.
#[pyclass(module = "falsify")]
struct Scenario {
    program: ScenarioProgram,
}

#[pymethods]
impl Scenario {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        Ok(Self {
            program: scenario::parse_scenario(source).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::new(&text)
    }

    /// Names of the externally sampled parameters, in declaration order.
    fn externals(&self) -> Vec<String> {
        self.program.externals().into_iter().map(|p| p.name).collect()
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        self.program.metadata().iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    /// One feature vector as a dict, or None when every retry was rejected.
    /// `externals` gives one value per external parameter.
    #[pyo3(signature = (seed, externals=None, max_rejects=scenario::DEFAULT_MAX_REJECTS))]
    fn sample<'py>(
        &self,
        py: Python<'py>,
        seed: u64,
        externals: Option<Vec<Bound<'py, PyAny>>>,
        max_rejects: usize,
    ) -> PyResult<Option<Bound<'py, PyDict>>> {
        let values = externals
            .unwrap_or_default()
            .iter()
            .map(from_py)
            .collect::<PyResult<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match scenario::sample(&self.program, &mut FixedExternals::new(values), &mut rng, max_rejects)
            .map_err(value_err)?
        {
            Sample::Accepted(fv) => Ok(Some(features_to_dict(py, &fv.values)?)),
            Sample::Rejected { .. } => Ok(None),
        }
    }

    /// `n` feature vectors with externals drawn uniformly.
    #[pyo3(signature = (n, seed=0))]
    fn export_configs<'py>(&self, py: Python<'py>, n: usize, seed: u64) -> PyResult<Bound<'py, PyList>> {
        let configs = export_training_configs(&self.program, None, n, seed).map_err(value_err)?;
        let items = configs
            .iter()
            .map(|c| features_to_dict(py, &c.values))
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, items)
    }
}

/// Robustness of `spec` (source text or a preset name) over a trace given
/// as sample times plus one list per signal.
#[pyfunction]
fn robustness(spec: &str, times: Vec<f64>, signals: &Bound<'_, PyDict>) -> PyResult<f64> {
    let tr = build_trace(times, signals)?;
    Ok(monitor::robustness(&spec_formula(spec)?, &tr).map_err(value_err)?.value())
}

#[pyfunction]
fn satisfied(spec: &str, times: Vec<f64>, signals: &Bound<'_, PyDict>) -> PyResult<bool> {
    let tr = build_trace(times, signals)?;
    monitor::satisfied(&spec_formula(spec)?, &tr).map_err(value_err)
}

/// Runs the reference taxi simulator and returns `{"t": [...], signal: [...]}`.
#[pyfunction]
#[pyo3(signature = (features, duration=30.0, period=0.1, seed=0, flags=None))]
fn run_episode<'py>(
    py: Python<'py>,
    features: &Bound<'py, PyDict>,
    duration: f64,
    period: f64,
    seed: u64,
    flags: Option<BTreeMap<String, String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut values = IndexMap::new();
    for (k, v) in features.iter() {
        values.insert(k.extract::<String>()?, from_py(&v)?);
    }
    let config = TestConfig {
        episode: 0,
        features: values,
        duration,
        period,
        seed,
        flags: flags.unwrap_or_default(),
    };
    config.validate().map_err(value_err)?;
    let mode = mode_for(&config, &FaultProfile::default_profile()).map_err(value_err)?;
    let tr = py.detach(|| refsim_episode(&config, mode)).map_err(value_err)?;
    trace_to_dict(py, &tr)
}

/// Runs a campaign against the builtin simulator. Returns a dict with
/// `rows` (list of dicts), `report` (CSV text for `ce`, else None) and
/// `stopped_early`.
#[pyfunction]
#[pyo3(signature = (scenario, spec, sampler="uniform", episodes=100, seed=0, parallel=1,
                    stop_on_falsify=false, flags=None, out=None, record_wall_time=true))]
#[allow(clippy::too_many_arguments)]
fn campaign<'py>(
    py: Python<'py>,
    scenario: PathBuf,
    spec: PathBuf,
    sampler: &str,
    episodes: u64,
    seed: u64,
    parallel: usize,
    stop_on_falsify: bool,
    flags: Option<BTreeMap<String, String>>,
    out: Option<PathBuf>,
    record_wall_time: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let sampler = match sampler {
        "uniform" => SamplerChoice::Uniform,
        "halton" => SamplerChoice::Halton { scramble: false },
        "ce" => SamplerChoice::CrossEntropy(CeParams::default()),
        other => return Err(PyValueError::new_err(format!("unknown sampler `{other}`"))),
    };
    let config = CampaignConfig {
        scenario,
        spec,
        sampler,
        target: TargetSpec::Builtin(BuiltinTarget::default()),
        options: CampaignOptions {
            max_episodes: episodes,
            stop_on_first: stop_on_falsify,
            parallelism: parallel,
            seed,
            flags: flags.unwrap_or_default(),
            record_wall_time,
            output: out,
            ..CampaignOptions::default()
        },
    };
    let result = py.detach(|| run_campaign(&config)).map_err(value_err)?;
    let rows = result
        .table
        .rows
        .iter()
        .map(|r| row_to_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("rows", PyList::new(py, rows)?)?;
    d.set_item("report", result.report.map(|r| r.to_csv()))?;
    d.set_item("stopped_early", result.stopped_early)?;
    Ok(d)
}

/// Binned robustness statistics of a saved table (JSON lines or CSV):
/// a list of `(lo, hi, count, median)` tuples.
#[pyfunction]
#[pyo3(signature = (table, parameter, width=0.5))]
fn analyze(table: PathBuf, parameter: &str, width: f64) -> PyResult<Vec<(f64, f64, usize, Option<f64>)>> {
    let t = if table.extension().is_some_and(|e| e == "csv") {
        let text = std::fs::read_to_string(&table).map_err(|e| PyIOError::new_err(e.to_string()))?;
        ResultTable::from_csv(&text)
    } else {
        ResultTable::load(&table)
    }
    .map_err(value_err)?;
    Ok(binned_stats(&t, parameter, width)
        .map_err(value_err)?
        .into_iter()
        .map(|b| (b.lo, b.hi, b.count, b.median))
        .collect())
}

#[pymodule]
fn falsify(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(robustness, m)?)?;
    m.add_function(wrap_pyfunction!(satisfied, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(campaign, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    Ok(())
}
