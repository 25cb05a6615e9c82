//! Samplers over the external-parameter domain of a scenario.
//!
//! All samplers share the [`Sampler`] interface: propose a point with
//! [`Sampler::next_point`], then report how the episode went with
//! [`Sampler::record_feedback`]. Uniform and Halton sampling ignore feedback;
//! the cross-entropy sampler uses it to move its proposal distribution toward
//! low-robustness (failing) regions.

mod cross_entropy;
mod halton;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cross_entropy::{ce_update, CeDimension, CeParams, CrossEntropySampler, CrossEntropyState};
pub use halton::{radical_inverse, star_discrepancy_1d, HaltonSampler, PRIMES};

use crate::scenario::{ExternalDomain, ExternalParam};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("dimension `{0}` has an empty or inverted range")]
    BadRange(String),
    #[error("discrete dimension `{0}` has no values")]
    EmptyDiscrete(String),
    #[error("halton sampling supports at most {} dimensions", PRIMES.len())]
    TooManyDimensions,
    #[error("sampler `{0}` is not adaptive and has no learned distribution")]
    NotAdaptive(String),
    #[error("invalid cross-entropy parameter: {0}")]
    BadParams(String),
    #[error("invalid probabilities for dimension `{0}`")]
    BadProbabilities(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dimension {
    Continuous { lo: f64, hi: f64 },
    Discrete(Vec<Value>),
}

/// Ordered, named dimensions of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    dims: Vec<(String, Dimension)>,
}

impl DomainSpec {
    pub fn new(dims: Vec<(String, Dimension)>) -> Result<Self, SamplerError> {
        for (name, d) in &dims {
            match d {
                Dimension::Continuous { lo, hi } => {
                    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                        return Err(SamplerError::BadRange(name.clone()));
                    }
                }
                Dimension::Discrete(v) if v.is_empty() => return Err(SamplerError::EmptyDiscrete(name.clone())),
                Dimension::Discrete(_) => {}
            }
        }
        Ok(Self { dims })
    }

    /// One dimension per external parameter, named by the parameter's id.
    pub fn from_externals(params: &[ExternalParam]) -> Result<Self, SamplerError> {
        Self::new(
            params
                .iter()
                .map(|p| {
                    let d = match &p.domain {
                        ExternalDomain::Continuous { lo, hi } => Dimension::Continuous { lo: *lo, hi: *hi },
                        ExternalDomain::Discrete(v) => Dimension::Discrete(v.clone()),
                    };
                    (p.id.clone(), d)
                })
                .collect(),
        )
    }

    pub fn dims(&self) -> &[(String, Dimension)] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn contains(&self, point: &[Value]) -> bool {
        point.len() == self.dims.len()
            && self.dims.iter().zip(point).all(|((_, d), v)| match (d, v) {
                (Dimension::Continuous { lo, hi }, Value::Real(x)) => lo <= x && x <= hi,
                (Dimension::Discrete(vals), v) => vals.contains(v),
                _ => false,
            })
    }

    /// Maps a unit-cube coordinate onto dimension `i`.
    fn scale(&self, i: usize, u: f64) -> Value {
        match &self.dims[i].1 {
            Dimension::Continuous { lo, hi } => Value::Real(lo + (hi - lo) * u),
            Dimension::Discrete(vals) => {
                let k = ((u * vals.len() as f64) as usize).min(vals.len() - 1);
                vals[k].clone()
            }
        }
    }
}

/// Result of one episode as seen by a sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Feedback {
    Robustness(f64),
    Rejected,
}

/// One row of a learned-distribution report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dimension: String,
    /// Lower bucket bound, or the tag for discrete dimensions.
    pub bucket_lo: Value,
    /// Upper bucket bound; `None` for discrete dimensions.
    pub bucket_hi: Option<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub rows: Vec<ReportRow>,
}

impl DistributionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dimension,bucket_lo,bucket_hi,probability\n");
        for r in &self.rows {
            let hi = r.bucket_hi.map(|h| h.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", r.dimension, r.bucket_lo, hi, r.probability));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Sum of probabilities of the continuous buckets of `dimension` whose
    /// extent overlaps the open interval `(lo, hi)`.
    pub fn mass_overlapping(&self, dimension: &str, lo: f64, hi: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.dimension == dimension)
            .filter_map(|r| match (&r.bucket_lo, r.bucket_hi) {
                (Value::Real(b_lo), Some(b_hi)) if *b_lo < hi && b_hi > lo => Some(r.probability),
                _ => None,
            })
            .sum()
    }
}

pub trait Sampler: Send {
    fn name(&self) -> &str;

    fn domain(&self) -> &DomainSpec;

    /// Next point, one value per domain dimension.
    fn next_point(&mut self, rng: &mut dyn RngCore) -> Vec<Value>;

    /// Reports the outcome of the episode run at `point`.
    fn record_feedback(&mut self, point: &[Value], feedback: Feedback);

    fn is_adaptive(&self) -> bool {
        false
    }

    fn distribution_report(&self) -> Result<DistributionReport, SamplerError> {
        Err(SamplerError::NotAdaptive(self.name().to_string()))
    }
}

/// Independent uniform draws in every dimension.
#[derive(Debug, Clone)]
pub struct UniformSampler {
    domain: DomainSpec,
}

impl UniformSampler {
    pub fn new(domain: DomainSpec) -> Self {
        Self { domain }
    }
}

impl Sampler for UniformSampler {
    fn name(&self) -> &str {
        "uniform"
    }

    fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn next_point(&mut self, rng: &mut dyn RngCore) -> Vec<Value> {
        (0..self.domain.len())
            .map(|i| {
                let u: f64 = rng.random();
                self.domain.scale(i, u)
            })
            .collect()
    }

    /// Feedback does not influence uniform sampling.
    fn record_feedback(&mut self, _point: &[Value], _feedback: Feedback) {}
}

/// Which sampler a campaign uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerChoice {
    Uniform,
    Halton { scramble: bool },
    CrossEntropy(CeParams),
}

impl SamplerChoice {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, SamplerChoice::CrossEntropy(_))
    }

    pub fn build(&self, domain: DomainSpec, seed: u64) -> Result<Box<dyn Sampler>, SamplerError> {
        Ok(match self {
            SamplerChoice::Uniform => Box::new(UniformSampler::new(domain)),
            SamplerChoice::Halton { scramble: false } => Box::new(HaltonSampler::new(domain)?),
            SamplerChoice::Halton { scramble: true } => Box::new(HaltonSampler::scrambled(domain, seed)?),
            SamplerChoice::CrossEntropy(params) => Box::new(CrossEntropySampler::new(domain, params.clone())?),
        })
    }
}
