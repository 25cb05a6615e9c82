//! Quantitative robustness of metric temporal logic formulas over finite
//! sampled traces.
//!
//! Semantics are pointwise: temporal windows range over the trace's own
//! sample times, no interpolation. A formula is evaluated at the first
//! sample. Windows that contain no samples evaluate `always` to
//! [`EMPTY_WINDOW_SENTINEL`] and `eventually`/`until` to its negation.

mod eval;
mod formula;
mod parse;
mod trace;

use thiserror::Error;

pub use eval::{robustness, robustness_series, satisfied};
pub use formula::{Formula, Interval, Margin};
pub use parse::parse_spec;
pub use trace::{Trace, TraceBuilder};

use crate::lex::Pos;

/// Value of `always` over an empty window (and minus that of `eventually`).
pub const EMPTY_WINDOW_SENTINEL: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("invalid interval {0}")]
    BadInterval(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("signal `{0}` does not appear in the trace")]
    UnknownSignal(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("timestamps must strictly increase (sample {index})")]
    NonIncreasing { index: usize },
    #[error("inconsistent signals: {0}")]
    InconsistentSignals(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Robustness value: nonnegative when satisfied, nonpositive when violated.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Robustness(pub f64);

impl Robustness {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_violation(self) -> bool {
        self.0 <= 0.0
    }
}

/// The two centerline-tracking requirements used throughout the taxiing
/// case study, over signed cross-track error `cte` in meters.
pub mod presets {
    use super::{parse_spec, Formula};

    /// Stay within 1.5 m of the centerline for the whole episode.
    pub const PHI_ALWAYS: &str = "always (abs(cte) <= 1.5)";
    /// Within 10 s reach 1.5 m of the centerline and stay there.
    pub const PHI_EVENTUALLY: &str = "eventually[0, 10] always (abs(cte) <= 1.5)";

    pub fn phi_always() -> Formula {
        parse_spec(PHI_ALWAYS).expect("preset parses")
    }

    pub fn phi_eventually() -> Formula {
        parse_spec(PHI_EVENTUALLY).expect("preset parses")
    }

    pub fn by_name(name: &str) -> Option<Formula> {
        match name {
            "phi_always" | "always" => Some(phi_always()),
            "phi_eventually" | "eventually" => Some(phi_eventually()),
            _ => None,
        }
    }
}
