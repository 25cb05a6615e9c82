//! Probabilistic scenario programs.
//!
//! A scenario program declares the semantic parameters of a test (time of
//! day, weather, initial pose, ...) together with their distributions,
//! derived quantities and hard constraints. Some parameters may be
//! *external*: their values come from an outside search algorithm instead
//! of the program's own distribution. See `docs/scenario-grammar.md` for the
//! concrete syntax.

mod expr;
mod parse;
mod sample;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{BinOp, Expr, Func};
pub use parse::parse_scenario;
pub use sample::{sample, ExternalSampler, FixedExternals, NoExternals, Sample, DEFAULT_MAX_REJECTS};

use crate::lex::Pos;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{}duplicate name `{name}`", fmt_pos(pos))]
    DuplicateName { name: String, pos: Option<Pos> },
    #[error("{}`{name}` is used before it is declared", fmt_pos(pos))]
    ForwardReference { name: String, pos: Option<Pos> },
    #[error("{}unknown name `{name}`", fmt_pos(pos))]
    UnknownName { name: String, pos: Option<Pos> },
    #[error("{}invalid bounds for `{name}`: {lo} > {hi}", fmt_pos(pos))]
    InvalidBounds { name: String, lo: f64, hi: f64, pos: Option<Pos> },
    #[error("{}negative weight {weight} in options for `{name}`", fmt_pos(pos))]
    NegativeWeight { name: String, weight: f64, pos: Option<Pos> },
    #[error("{}options for `{name}` must have at least one entry with positive total weight", fmt_pos(pos))]
    EmptyOptions { name: String, pos: Option<Pos> },
    #[error("{}external parameter id `{id}` declared twice", fmt_pos(pos))]
    DuplicateExternal { id: String, pos: Option<Pos> },
    #[error("external sampler supplied {got} values for {expected} external parameters")]
    ExternalArity { expected: usize, got: usize },
    #[error("external value {value} for `{id}` is outside its declared domain")]
    ExternalDomainViolation { id: String, value: Value },
    #[error("division by zero while evaluating `{name}`")]
    DivisionByZero { name: String },
    #[error("type error in `{name}`: {detail}")]
    TypeMismatch { name: String, detail: String },
    #[error("`{name}` evaluated to a non-finite value")]
    NonFinite { name: String },
}

fn fmt_pos(pos: &Option<Pos>) -> String {
    pos.map(|p| format!("{p}: ")).unwrap_or_default()
}

/// Domain of an external parameter, published to external samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExternalDomain {
    Continuous { lo: f64, hi: f64 },
    Discrete(Vec<Value>),
}

impl ExternalDomain {
    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (ExternalDomain::Continuous { lo, hi }, Value::Real(x)) => *lo <= *x && *x <= *hi,
            (ExternalDomain::Discrete(vals), v) => vals.iter().any(|c| c == v),
            _ => false,
        }
    }
}

/// One entry of an `Options` distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Choice {
    Value(Value),
    /// Pick this range with its weight, then draw uniformly inside it.
    Range(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    Options(Vec<(Choice, f64)>),
    Constant(Value),
    External { id: String, domain: ExternalDomain },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeclKind {
    Param(Distribution),
    Derived(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Requirement {
    pub expr: Expr,
    pub line: usize,
}

/// An external parameter as seen by a sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalParam {
    pub id: String,
    pub name: String,
    pub domain: ExternalDomain,
}

/// A parsed and validated scenario program. Immutable once built.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioProgram {
    decls: Vec<Decl>,
    requires: Vec<Requirement>,
    metadata: IndexMap<String, String>,
}

impl ScenarioProgram {
    pub fn decls(&self) -> &[Decl] {
        &self.decls
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &Distribution)> {
        self.decls.iter().filter_map(|d| match &d.kind {
            DeclKind::Param(dist) => Some((d.name.as_str(), dist)),
            DeclKind::Derived(_) => None,
        })
    }

    pub fn derived(&self) -> impl Iterator<Item = (&str, &Expr)> {
        self.decls.iter().filter_map(|d| match &d.kind {
            DeclKind::Derived(e) => Some((d.name.as_str(), e)),
            DeclKind::Param(_) => None,
        })
    }

    pub fn requires(&self) -> &[Requirement] {
        &self.requires
    }

    pub fn metadata(&self) -> &IndexMap<String, String> {
        &self.metadata
    }

    /// Declared names (parameters and derived values) in declaration order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.decls.iter().map(|d| d.name.as_str())
    }

    pub fn distribution(&self, name: &str) -> Option<&Distribution> {
        self.params().find(|(n, _)| *n == name).map(|(_, d)| d)
    }

    pub fn externals(&self) -> Vec<ExternalParam> {
        self.params()
            .filter_map(|(name, dist)| match dist {
                Distribution::External { id, domain } => Some(ExternalParam {
                    id: id.clone(),
                    name: name.to_string(),
                    domain: domain.clone(),
                }),
                _ => None,
            })
            .collect()
    }
}

/// Where a feature vector came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub sampler: String,
    pub index: u64,
    pub seed: u64,
}

/// One concrete assignment of every declared name of a scenario program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: IndexMap<String, Value>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl FeatureVector {
    pub fn new(values: IndexMap<String, Value>) -> Self {
        Self {
            values,
            provenance: Provenance::default(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn real(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(Value::as_real)
    }

    pub fn tag(&self, name: &str) -> Option<&str> {
        self.values.get(name).and_then(Value::as_tag)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Value equality with reals compared bitwise; provenance is ignored.
    pub fn same_values(&self, other: &FeatureVector) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .all(|((ka, va), (kb, vb))| ka == kb && va.bit_eq(vb))
    }
}
