use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::PlantState;
use crate::value::Value;

const DEFAULT_PROFILE: &str = include_str!("../../data/default_fault_profile.json");

/// What a bias or guard reads: a feature of the test configuration, or a
/// live quantity (`s`, `cte`, `he`, or episode time `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Feature(String),
    State(String),
}

fn lookup_state(name: &str, state: &PlantState, t: f64) -> Option<f64> {
    match name {
        "s" => Some(state.s),
        "cte" => Some(state.cte),
        "he" => Some(state.he),
        "t" => Some(t),
        _ => None,
    }
}

/// One conjunct of a rule guard. Interval bounds are inclusive; `is`
/// matches discrete tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    #[serde(flatten)]
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is: Option<Vec<String>>,
}

impl Condition {
    fn holds(&self, features: &IndexMap<String, Value>, state: &PlantState, t: f64) -> bool {
        let value = match &self.source {
            Source::Feature(f) => features.get(f).cloned(),
            Source::State(s) => lookup_state(s, state, t).map(Value::Real),
        };
        let Some(value) = value else { return false };
        if let Some(tags) = &self.is {
            return matches!(&value, Value::Tag(v) if tags.iter().any(|t| t == v));
        }
        let Value::Real(x) = value else { return false };
        self.min.is_none_or(|lo| x >= lo) && self.max.is_none_or(|hi| x <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Bias {
    Constant {
        value: f64,
    },
    /// `amplitude * sin(2 pi (x - phase) / period)` where `x` is a feature
    /// or live quantity named by `of`.
    Sinusoid {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
        of: String,
    },
}

impl Bias {
    fn eval(&self, features: &IndexMap<String, Value>, state: &PlantState, t: f64) -> f64 {
        match self {
            Bias::Constant { value } => *value,
            Bias::Sinusoid {
                amplitude,
                period,
                phase,
                of,
            } => {
                let x = lookup_state(of, state, t).or_else(|| features.get(of).and_then(Value::as_real));
                x.map_or(0.0, |x| amplitude * (TAU * (x - phase) / period).sin())
            }
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Bias::Constant { value } => value.is_finite(),
            Bias::Sinusoid {
                amplitude,
                period,
                phase,
                ..
            } => amplitude.is_finite() && period.is_finite() && *period != 0.0 && phase.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRule {
    pub name: String,
    /// All conditions must hold for the rule to fire.
    #[serde(default)]
    pub guard: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cte_bias: Option<Bias>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub he_bias: Option<Bias>,
}

impl FaultRule {
    pub fn is_active(&self, features: &IndexMap<String, Value>, state: &PlantState, t: f64) -> bool {
        self.guard.iter().all(|c| c.holds(features, state, t))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    #[serde(default)]
    pub cte_sigma: f64,
    #[serde(default)]
    pub he_sigma: f64,
}

/// Biases injected into the perception estimates, plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultProfile {
    pub rules: Vec<FaultRule>,
    #[serde(default)]
    pub noise: Noise,
}

impl FaultProfile {
    /// The profile shipped in `data/default_fault_profile.json`.
    pub fn default_profile() -> Self {
        Self::from_json(DEFAULT_PROFILE).expect("bundled profile is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let p: FaultProfile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for r in &self.rules {
            if !seen.insert(r.name.as_str()) {
                return Err(format!("duplicate rule `{}`", r.name));
            }
            if [&r.cte_bias, &r.he_bias].into_iter().flatten().any(|b| !b.is_finite()) {
                return Err(format!("rule `{}` has a non-finite bias", r.name));
            }
        }
        let n = self.noise;
        if !(n.cte_sigma >= 0.0 && n.cte_sigma.is_finite() && n.he_sigma >= 0.0 && n.he_sigma.is_finite()) {
            return Err("noise sigmas must be finite and nonnegative".into());
        }
        Ok(())
    }

    /// Drops the named rules. Unknown names are an error so typos surface.
    pub fn without(mut self, names: &[&str]) -> Result<Self, String> {
        for n in names {
            if !self.rules.iter().any(|r| r.name == *n) {
                return Err(format!("no fault rule named `{n}`"));
            }
        }
        self.rules.retain(|r| !names.contains(&r.name.as_str()));
        Ok(self)
    }

    pub fn active_rules<'a>(
        &'a self,
        features: &'a IndexMap<String, Value>,
        state: &'a PlantState,
        t: f64,
    ) -> impl Iterator<Item = &'a FaultRule> + 'a {
        self.rules.iter().filter(move |r| r.is_active(features, state, t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerceptionMode {
    GroundTruth,
    Stub(FaultProfile),
}

/// Estimated `(cte, he)` for the controller.
pub fn perceive<R: Rng + ?Sized>(
    mode: &PerceptionMode,
    state: &PlantState,
    features: &IndexMap<String, Value>,
    t: f64,
    rng: &mut R,
) -> (f64, f64) {
    let PerceptionMode::Stub(profile) = mode else {
        return (state.cte, state.he);
    };
    let (mut cte, mut he) = (state.cte, state.he);
    for rule in profile.active_rules(features, state, t) {
        if let Some(b) = &rule.cte_bias {
            cte += b.eval(features, state, t);
        }
        if let Some(b) = &rule.he_bias {
            he += b.eval(features, state, t);
        }
    }
    if profile.noise.cte_sigma > 0.0 {
        cte += Normal::new(0.0, profile.noise.cte_sigma).expect("validated").sample(rng);
    }
    if profile.noise.he_sigma > 0.0 {
        he += Normal::new(0.0, profile.noise.he_sigma).expect("validated").sample(rng);
    }
    (cte, he)
}
