use indexmap::IndexMap;
use rand::Rng;

use super::expr::Eval;
use super::{Choice, DeclKind, Distribution, ExternalParam, FeatureVector, ScenarioError, ScenarioProgram};
use crate::value::Value;

pub const DEFAULT_MAX_REJECTS: usize = 1000;

/// Supplies values for a program's external parameters.
///
/// Queried exactly once per call to [`sample`], before any internal draw.
pub trait ExternalSampler {
    /// One value per entry of `params`, in the same order.
    fn next_externals(&mut self, params: &[ExternalParam]) -> Vec<Value>;
}

/// For programs without external parameters.
pub struct NoExternals;

impl ExternalSampler for NoExternals {
    fn next_externals(&mut self, _params: &[ExternalParam]) -> Vec<Value> {
        Vec::new()
    }
}

/// Always returns the same values; counts how often it was asked.
#[derive(Debug, Clone)]
pub struct FixedExternals {
    pub values: Vec<Value>,
    pub queries: usize,
}

impl FixedExternals {
    pub fn new(values: Vec<Value>) -> Self {
        Self { values, queries: 0 }
    }
}

impl ExternalSampler for FixedExternals {
    fn next_externals(&mut self, _params: &[ExternalParam]) -> Vec<Value> {
        self.queries += 1;
        self.values.clone()
    }
}

impl<F> ExternalSampler for F
where
    F: FnMut(&[ExternalParam]) -> Vec<Value>,
{
    fn next_externals(&mut self, params: &[ExternalParam]) -> Vec<Value> {
        self(params)
    }
}

/// Outcome of one sampling call.
#[must_use]
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Accepted(FeatureVector),
    /// Every internal retry violated a `require`. `externals` holds the
    /// external values that were kept fixed across all attempts.
    Rejected { attempts: usize, externals: Vec<Value> },
}

impl Sample {
    pub fn accepted(self) -> Option<FeatureVector> {
        match self {
            Sample::Accepted(fv) => Some(fv),
            Sample::Rejected { .. } => None,
        }
    }

    pub fn is_rejected(&self) -> bool {
        matches!(self, Sample::Rejected { .. })
    }
}

/// Draws one feature vector from `program`.
///
/// External values are fetched first and then held fixed while internal
/// distributions are redrawn up to `max_rejects` times.
pub fn sample<R: Rng + ?Sized>(
    program: &ScenarioProgram,
    external: &mut dyn ExternalSampler,
    rng: &mut R,
    max_rejects: usize,
) -> Result<Sample, ScenarioError> {
    let params = program.externals();
    let ext_values = external.next_externals(&params);
    if ext_values.len() != params.len() {
        return Err(ScenarioError::ExternalArity {
            expected: params.len(),
            got: ext_values.len(),
        });
    }
    for (p, v) in params.iter().zip(&ext_values) {
        if !p.domain.contains(v) {
            return Err(ScenarioError::ExternalDomainViolation {
                id: p.id.clone(),
                value: v.clone(),
            });
        }
    }
    let ext_by_id: IndexMap<&str, &Value> = params.iter().map(|p| p.id.as_str()).zip(ext_values.iter()).collect();

    for _ in 0..max_rejects.max(1) {
        let mut env: IndexMap<String, Value> = IndexMap::with_capacity(program.decls().len());
        for decl in program.decls() {
            let v = match &decl.kind {
                DeclKind::Param(dist) => draw(dist, &ext_by_id, rng),
                DeclKind::Derived(expr) => match expr.eval(&env, &decl.name)? {
                    Eval::Num(x) if x.is_finite() => Value::Real(x),
                    Eval::Num(_) => return Err(ScenarioError::NonFinite { name: decl.name.clone() }),
                    Eval::Tag(s) => Value::Tag(s),
                    Eval::Bool(_) => {
                        return Err(ScenarioError::TypeMismatch {
                            name: decl.name.clone(),
                            detail: "derived value is a boolean".into(),
                        })
                    }
                },
            };
            env.insert(decl.name.clone(), v);
        }
        if requirements_hold(program, &env)? {
            return Ok(Sample::Accepted(FeatureVector::new(env)));
        }
    }
    Ok(Sample::Rejected {
        attempts: max_rejects.max(1),
        externals: ext_values,
    })
}

fn requirements_hold(program: &ScenarioProgram, env: &IndexMap<String, Value>) -> Result<bool, ScenarioError> {
    for req in program.requires() {
        let ctx = format!("require (line {})", req.line);
        match req.expr.eval(env, &ctx)? {
            Eval::Bool(true) => {}
            Eval::Bool(false) => return Ok(false),
            _ => {
                return Err(ScenarioError::TypeMismatch {
                    name: ctx,
                    detail: "constraint is not a boolean".into(),
                })
            }
        }
    }
    Ok(true)
}

fn draw<R: Rng + ?Sized>(dist: &Distribution, externals: &IndexMap<&str, &Value>, rng: &mut R) -> Value {
    match dist {
        Distribution::Uniform { lo, hi } => Value::Real(uniform(*lo, *hi, rng)),
        Distribution::Constant(v) => v.clone(),
        Distribution::External { id, .. } => externals[id.as_str()].clone(),
        Distribution::Options(entries) => {
            let total: f64 = entries.iter().map(|(_, w)| w).sum();
            let mut u = rng.random::<f64>() * total;
            // fall back to the last positive-weight entry on rounding overshoot
            let mut chosen = entries.iter().rev().find(|(_, w)| *w > 0.0).expect("validated");
            for entry in entries {
                if entry.1 > 0.0 && u < entry.1 {
                    chosen = entry;
                    break;
                }
                u -= entry.1;
            }
            match &chosen.0 {
                Choice::Value(v) => v.clone(),
                Choice::Range(lo, hi) => Value::Real(uniform(*lo, *hi, rng)),
            }
        }
    }
}

fn uniform<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if lo == hi {
        return lo;
    }
    lo + (hi - lo) * rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::scenario::parse_scenario;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn point_mass() {
        let p = parse_scenario("x = Uniform(2, 2)").unwrap();
        let fv = sample(&p, &mut NoExternals, &mut rng(1), 10).unwrap().accepted().unwrap();
        assert_eq!(fv.real("x"), Some(2.0));
    }

    #[test]
    fn degenerate_interval_always_zero() {
        let p = parse_scenario("x = Uniform(0, 0)").unwrap();
        let mut r = rng(3);
        for _ in 0..100 {
            let fv = sample(&p, &mut NoExternals, &mut r, 10).unwrap().accepted().unwrap();
            assert_eq!(fv.real("x"), Some(0.0));
        }
    }

    #[test]
    fn constraint_filters_samples() {
        let p = parse_scenario("x = Uniform(0,1)\nrequire x > 0.5").unwrap();
        let mut r = rng(7);
        let mut accepted = 0;
        for _ in 0..2000 {
            if let Sample::Accepted(fv) = sample(&p, &mut NoExternals, &mut r, 50).unwrap() {
                assert!(fv.real("x").unwrap() > 0.5);
                accepted += 1;
            }
        }
        assert!(accepted > 1900);
    }

    #[test]
    fn external_held_fixed_until_rejected() {
        let p = parse_scenario("x = External(e1, 0, 1)\nrequire x < 0.5").unwrap();
        let mut ext = FixedExternals::new(vec![Value::Real(0.7)]);
        let out = sample(&p, &mut ext, &mut rng(0), 25).unwrap();
        assert_eq!(
            out,
            Sample::Rejected {
                attempts: 25,
                externals: vec![Value::Real(0.7)]
            }
        );
        assert_eq!(ext.queries, 1);
    }

    #[test]
    fn external_out_of_domain() {
        let p = parse_scenario("x = External(e1, 0, 1)").unwrap();
        let mut ext = FixedExternals::new(vec![Value::Real(1.5)]);
        assert!(matches!(
            sample(&p, &mut ext, &mut rng(0), 1),
            Err(ScenarioError::ExternalDomainViolation { .. })
        ));
        let p = parse_scenario("c = External(e, [\"clear\"])").unwrap();
        let mut ext = FixedExternals::new(vec!["stratus".into()]);
        assert!(matches!(
            sample(&p, &mut ext, &mut rng(0), 1),
            Err(ScenarioError::ExternalDomainViolation { .. })
        ));
    }

    #[test]
    fn division_by_zero_in_derived() {
        let p = parse_scenario("x = Uniform(0, 0)\ny = 1 / x").unwrap();
        assert!(matches!(
            sample(&p, &mut NoExternals, &mut rng(0), 1),
            Err(ScenarioError::DivisionByZero { .. })
        ));
    }

    #[test]
    fn discrete_tags_and_conditionals() {
        let src = "rainy = Options({0: 2, 1: 1})\nwet = Options({\"overcast\": 1, \"stratus\": 1})\n\
                   dry = Options({\"clear\": 1, \"cirrus\": 1})\nclouds = if rainy == 1 then wet else dry\n\
                   require not (clouds == \"stratus\" and rainy == 0)";
        let p = parse_scenario(src).unwrap();
        let mut r = rng(11);
        for _ in 0..500 {
            let fv = sample(&p, &mut NoExternals, &mut r, 10).unwrap().accepted().unwrap();
            let tag = fv.tag("clouds").unwrap();
            if fv.real("rainy") == Some(1.0) {
                assert!(tag == "overcast" || tag == "stratus");
            } else {
                assert!(tag == "clear" || tag == "cirrus");
            }
        }
    }
}
