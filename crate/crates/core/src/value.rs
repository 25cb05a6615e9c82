use std::fmt;

use serde::{Deserialize, Serialize};

/// A concrete parameter value: either a real number or a discrete tag
/// such as a cloud type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Tag(String),
}

impl Value {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Tag(_) => None,
        }
    }

    pub fn as_tag(&self) -> Option<&str> {
        match self {
            Value::Tag(s) => Some(s),
            Value::Real(_) => None,
        }
    }

    /// Bitwise equality for reals, so that NaN-free values compare exactly
    /// and `-0.0` differs from `0.0`.
    pub fn bit_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            (Value::Tag(a), Value::Tag(b)) => a == b,
            _ => false,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Tag(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Tag(s)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{x}"),
            Value::Tag(s) => f.write_str(s),
        }
    }
}
