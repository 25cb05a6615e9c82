use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::table::ResultTable;
use super::EngineError;
use crate::samplers::{CeParams, CrossEntropySampler, DomainSpec, Feedback, Sampler, UniformSampler};
use crate::scenario::{sample, FeatureVector, FixedExternals, Provenance, Sample, ScenarioProgram, DEFAULT_MAX_REJECTS};

/// Export aborts once more than this fraction of draws has been rejected.
pub const MAX_REJECT_RATE: f64 = 0.99;

/// Draws `n` feature vectors for a training pipeline. External parameters
/// come from `sampler` (for instance a converged cross-entropy sampler) or,
/// if none is given, uniformly from their declared domains.
pub fn export_training_configs(
    program: &ScenarioProgram,
    sampler: Option<&mut dyn Sampler>,
    n: usize,
    seed: u64,
) -> Result<Vec<FeatureVector>, EngineError> {
    if n == 0 {
        return Err(EngineError::Config("export count must be at least 1".into()));
    }
    let mut fallback;
    let sampler: &mut dyn Sampler = match sampler {
        Some(s) => s,
        None => {
            fallback = UniformSampler::new(DomainSpec::from_externals(&program.externals())?);
            &mut fallback
        }
    };
    let name = sampler.name().to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let (mut attempts, mut rejected) = (0usize, 0usize);
    while out.len() < n {
        let point = sampler.next_point(&mut rng);
        let mut ext = FixedExternals::new(point);
        attempts += 1;
        match sample(program, &mut ext, &mut rng, DEFAULT_MAX_REJECTS)? {
            Sample::Accepted(fv) => out.push(fv.with_provenance(Provenance {
                sampler: name.clone(),
                index: out.len() as u64,
                seed,
            })),
            Sample::Rejected { .. } => rejected += 1,
        }
        if attempts >= 100 && rejected as f64 > MAX_REJECT_RATE * attempts as f64 {
            return Err(EngineError::TooManyRejections { rejected, attempts });
        }
    }
    Ok(out)
}

pub fn write_configs_jsonl(configs: &[FeatureVector], path: &Path) -> Result<(), EngineError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in configs {
        serde_json::to_writer(&mut f, c).map_err(|e| EngineError::Table(e.to_string()))?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Rebuilds a cross-entropy sampler's state from a campaign table by
/// replaying its points and outcomes in episode order.
pub fn learned_distribution(
    program: &ScenarioProgram,
    table: &ResultTable,
    params: CeParams,
) -> Result<CrossEntropySampler, EngineError> {
    let externals = program.externals();
    let mut ce = CrossEntropySampler::new(DomainSpec::from_externals(&externals)?, params)?;
    let mut rows: Vec<_> = table.rows.iter().collect();
    rows.sort_by_key(|r| r.episode);
    for r in rows {
        let point = externals
            .iter()
            .map(|p| {
                r.features
                    .get(&p.name)
                    .cloned()
                    .ok_or_else(|| EngineError::UnknownParameter(p.name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let feedback = match r.rho {
            Some(x) => Feedback::Robustness(x),
            None => Feedback::Rejected,
        };
        ce.record_feedback(&point, feedback);
    }
    Ok(ce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    #[test]
    fn constant_scenario_gives_identical_vectors() {
        let p = parse_scenario("x = Constant(2)\nc = Constant(\"clear\")\n").unwrap();
        let v = export_training_configs(&p, None, 3, 1).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|f| f.same_values(&v[0])));
    }

    #[test]
    fn hopeless_constraints_abort() {
        let p = parse_scenario("x = External(x, 0, 1)\nrequire x > 2\n").unwrap();
        assert!(matches!(
            export_training_configs(&p, None, 5, 1),
            Err(EngineError::TooManyRejections { .. })
        ));
    }
}
