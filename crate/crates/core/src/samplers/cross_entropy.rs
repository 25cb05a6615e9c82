use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Dimension, DistributionReport, DomainSpec, Feedback, ReportRow, Sampler, SamplerError};
use crate::value::Value;

/// Cross-entropy hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CeParams {
    /// Equal-width buckets per continuous dimension.
    pub buckets: usize,
    /// Feedbacks per update.
    pub batch_size: usize,
    /// Elite fraction used when no point reaches the threshold.
    pub elite_fraction: f64,
    /// Weight of the elite frequencies in the smoothed update.
    pub smoothing: f64,
    /// Robustness at or below which a point is a failure.
    pub threshold: f64,
}

impl Default for CeParams {
    fn default() -> Self {
        Self {
            buckets: 10,
            batch_size: 50,
            elite_fraction: 0.2,
            smoothing: 0.9,
            threshold: 0.0,
        }
    }
}

impl CeParams {
    fn validate(&self) -> Result<(), SamplerError> {
        if self.buckets == 0 {
            return Err(SamplerError::BadParams("buckets must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(SamplerError::BadParams("batch size must be at least 1".into()));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(SamplerError::BadParams("elite fraction must lie in (0, 1]".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(SamplerError::BadParams("smoothing must lie in (0, 1]".into()));
        }
        if !self.threshold.is_finite() {
            return Err(SamplerError::BadParams("threshold must be finite".into()));
        }
        Ok(())
    }
}

/// Categorical distribution over one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeDimension {
    pub name: String,
    pub dimension: Dimension,
    pub probs: Vec<f64>,
}

impl CeDimension {
    fn bucket_bounds(&self, i: usize) -> Option<(f64, f64)> {
        match &self.dimension {
            Dimension::Continuous { lo, hi } => {
                let w = (hi - lo) / self.probs.len() as f64;
                let b_hi = if i + 1 == self.probs.len() { *hi } else { lo + w * (i + 1) as f64 };
                Some((lo + w * i as f64, b_hi))
            }
            Dimension::Discrete(_) => None,
        }
    }

    /// Bucket (or tag index) containing `v`.
    pub fn bucket_of(&self, v: &Value) -> Option<usize> {
        match (&self.dimension, v) {
            (Dimension::Continuous { lo, hi }, Value::Real(x)) => {
                let b = self.probs.len();
                let k = ((x - lo) / (hi - lo) * b as f64).floor();
                Some((k.max(0.0) as usize).min(b - 1))
            }
            (Dimension::Discrete(vals), v) => vals.iter().position(|c| c == v),
            _ => None,
        }
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Value {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc && *p > 0.0 {
                k = i;
                break;
            }
        }
        match &self.dimension {
            Dimension::Continuous { .. } => {
                let (lo, hi) = self.bucket_bounds(k).expect("continuous");
                let v: f64 = rng.random();
                Value::Real(lo + (hi - lo) * v)
            }
            Dimension::Discrete(vals) => vals[k].clone(),
        }
    }
}

/// Learned per-dimension distributions plus the pending feedback batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEntropyState {
    pub params: CeParams,
    pub dims: Vec<CeDimension>,
    pub buffer: Vec<(Vec<Value>, Feedback)>,
}

impl CrossEntropyState {
    pub fn new(domain: &DomainSpec, params: CeParams) -> Result<Self, SamplerError> {
        params.validate()?;
        let dims = domain
            .dims()
            .iter()
            .map(|(name, d)| {
                let n = match d {
                    Dimension::Continuous { .. } => params.buckets,
                    Dimension::Discrete(v) => v.len(),
                };
                CeDimension {
                    name: name.clone(),
                    dimension: d.clone(),
                    probs: vec![1.0 / n as f64; n],
                }
            })
            .collect();
        Ok(Self {
            params,
            dims,
            buffer: Vec::new(),
        })
    }
}

/// One cross-entropy update from a full batch.
///
/// Elites are the non-rejected points with robustness at or below the
/// threshold; when there are none, the `ceil(elite_fraction * batch)` lowest
/// non-rejected points are used instead. Each dimension moves to
/// `smoothing * elite_frequency + (1 - smoothing) * previous`. A batch with
/// no non-rejected points leaves the state unchanged.
pub fn ce_update(state: &CrossEntropyState, batch: &[(Vec<Value>, Feedback)]) -> CrossEntropyState {
    let mut next = state.clone();
    next.buffer.clear();

    let mut scored: Vec<(&[Value], f64)> = batch
        .iter()
        .filter_map(|(p, fb)| match fb {
            Feedback::Robustness(r) => Some((p.as_slice(), *r)),
            Feedback::Rejected => None,
        })
        .collect();
    if scored.is_empty() {
        return next;
    }
    let failing: Vec<&[Value]> = scored
        .iter()
        .filter(|(_, r)| *r <= state.params.threshold)
        .map(|(p, _)| *p)
        .collect();
    let elites = if failing.is_empty() {
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        let k = ((state.params.elite_fraction * batch.len() as f64).ceil() as usize).clamp(1, scored.len());
        scored[..k].iter().map(|(p, _)| *p).collect()
    } else {
        failing
    };

    let alpha = state.params.smoothing;
    for (d, dim) in next.dims.iter_mut().enumerate() {
        let mut counts = vec![0usize; dim.probs.len()];
        let mut n = 0usize;
        for p in &elites {
            if let Some(k) = p.get(d).and_then(|v| dim.bucket_of(v)) {
                counts[k] += 1;
                n += 1;
            }
        }
        if n == 0 {
            continue;
        }
        for (p, c) in dim.probs.iter_mut().zip(&counts) {
            let freq = *c as f64 / n as f64;
            *p = alpha * freq + (1.0 - alpha) * *p;
            // repeated (1 - alpha) shrinking would eventually underflow to 0
            if alpha < 1.0 && *p == 0.0 {
                *p = f64::MIN_POSITIVE;
            }
        }
    }
    next
}

/// Cross-entropy sampler. Sequential by contract: interleave
/// `next_point` / `record_feedback` from a single caller.
#[derive(Debug, Clone)]
pub struct CrossEntropySampler {
    domain: DomainSpec,
    state: CrossEntropyState,
    updates: usize,
}

impl CrossEntropySampler {
    pub fn new(domain: DomainSpec, params: CeParams) -> Result<Self, SamplerError> {
        let state = CrossEntropyState::new(&domain, params)?;
        Ok(Self {
            domain,
            state,
            updates: 0,
        })
    }

    pub fn state(&self) -> &CrossEntropyState {
        &self.state
    }

    /// Number of completed batch updates.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Replaces the distribution of one dimension, e.g. to start from a prior.
    pub fn set_probabilities(&mut self, dim: usize, probs: Vec<f64>) -> Result<(), SamplerError> {
        let d = &mut self.state.dims[dim];
        let sum: f64 = probs.iter().sum();
        if probs.len() != d.probs.len() || probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(SamplerError::BadProbabilities(d.name.clone()));
        }
        d.probs = probs;
        Ok(())
    }
}

impl Sampler for CrossEntropySampler {
    fn name(&self) -> &str {
        "ce"
    }

    fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn next_point(&mut self, rng: &mut dyn RngCore) -> Vec<Value> {
        self.state.dims.iter().map(|d| d.draw(rng)).collect()
    }

    fn record_feedback(&mut self, point: &[Value], feedback: Feedback) {
        self.state.buffer.push((point.to_vec(), feedback));
        if self.state.buffer.len() >= self.state.params.batch_size {
            let batch = std::mem::take(&mut self.state.buffer);
            self.state = ce_update(&self.state, &batch);
            self.updates += 1;
        }
    }

    fn is_adaptive(&self) -> bool {
        true
    }

    fn distribution_report(&self) -> Result<DistributionReport, SamplerError> {
        let mut rows = Vec::new();
        for dim in &self.state.dims {
            for (i, p) in dim.probs.iter().enumerate() {
                let (bucket_lo, bucket_hi) = match (&dim.dimension, dim.bucket_bounds(i)) {
                    (_, Some((lo, hi))) => (Value::Real(lo), Some(hi)),
                    (Dimension::Discrete(vals), None) => (vals[i].clone(), None),
                    _ => unreachable!(),
                };
                rows.push(ReportRow {
                    dimension: dim.name.clone(),
                    bucket_lo,
                    bucket_hi,
                    probability: *p,
                });
            }
        }
        Ok(DistributionReport { rows })
    }
}
