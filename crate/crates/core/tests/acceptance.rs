//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use falsify_core::engine::{
    export_training_configs, filter_counterexamples, replay, run_campaign, BuiltinTarget, CampaignConfig,
    CampaignOptions, Override, ResultRow, ResultTable, TargetSpec, Verdict,
};
use falsify_core::monitor::{presets, robustness, satisfied, Trace};
use falsify_core::samplers::{star_discrepancy_1d, CeParams, HaltonSampler, SamplerChoice};
use falsify_core::samplers::{Dimension, DomainSpec};
use falsify_core::scenario::parse_scenario;
use falsify_core::simbridge::{decode, encode, ProtocolMessage, TestConfig};
use falsify_core::Value;
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn campaign(scn: &str, sampler: SamplerChoice, options: CampaignOptions) -> CampaignConfig {
    CampaignConfig {
        scenario: scenarios().join(scn),
        spec: scenarios().join("phi_eventually.mtl"),
        sampler,
        target: TargetSpec::Builtin(BuiltinTarget::default()),
        options,
    }
}

fn opts(n: u64, seed: u64) -> CampaignOptions {
    CampaignOptions {
        max_episodes: n,
        seed,
        record_wall_time: false,
        ..CampaignOptions::default()
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// 10,000 random formula/trace pairs (depth <= 3, length <= 8): satisfied
/// iff rho >= 0 off the rho = 0 boundary, in under 10 s.
fn c1_sign_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let started = Instant::now();
    let (mut exceptions, mut boundary) = (0, 0);
    for _ in 0..10_000 {
        let f = common::formula(&mut rng, 3);
        let tr = common::trace(&mut rng, 8);
        assert!(f.depth() <= 3 && tr.len() <= 8);
        let rho = robustness(&f, &tr).map_err(err)?.value();
        let sat = satisfied(&f, &tr).map_err(err)?;
        if rho == 0.0 {
            boundary += 1;
        } else if sat != (rho > 0.0) {
            exceptions += 1;
        }
    }
    let elapsed = started.elapsed();
    let detail = format!("{exceptions} exceptions, {boundary} pairs on rho = 0, {elapsed:.2?}");
    if exceptions == 0 && elapsed < Duration::from_secs(10) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// CTE(t) = max(8 - t, 0), t = 0..12: rho(phi_eventually) = 1.5 exactly.
fn c2_worked_example() -> Outcome {
    let times: Vec<f64> = (0..=12).map(f64::from).collect();
    let cte: Vec<f64> = times.iter().map(|t| (8.0 - t).max(0.0)).collect();
    let tr = Trace::from_columns(times.clone(), vec![("cte".into(), cte.clone())]).map_err(err)?;
    let rho = robustness(&presets::phi_eventually(), &tr).map_err(err)?.value();
    // brute force: best start in [0, 10] of the worst margin from there on
    let oracle = (0..times.len())
        .filter(|&i| times[i] <= 10.0)
        .map(|i| cte[i..].iter().map(|c| 1.5 - c.abs()).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let detail = format!("rho = {rho}, oracle = {oracle}");
    if rho == 1.5 && oracle == 1.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 256 base-2 Halton points beat 256 i.i.d. uniform points in star
/// discrepancy in at least 95 of 100 seeded comparisons.
fn c3_halton_spread() -> Outcome {
    let domain = DomainSpec::new(vec![("u".into(), Dimension::Continuous { lo: 0.0, hi: 1.0 })]).map_err(err)?;
    let h = HaltonSampler::new(domain).map_err(err)?;
    let halton: Vec<f64> = (1..=256).map(|i| h.unit_point(i)[0]).collect();
    let dh = star_discrepancy_1d(&halton);
    let wins = (0..100u64)
        .filter(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let iid: Vec<f64> = (0..256).map(|_| rng.random::<f64>()).collect();
            dh < star_discrepancy_1d(&iid)
        })
        .count();
    let detail = format!("Halton D* = {dh:.5}, wins {wins}/100");
    if wins >= 95 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Cross-entropy over the start pose puts >= 60% of the distance mass on
/// buckets overlapping [1400, 1500] m within 1,500 episodes, in under 2 min.
fn c4_cross_entropy() -> Outcome {
    let started = Instant::now();
    let r = run_campaign(&campaign(
        "falsif_ce.scn",
        SamplerChoice::CrossEntropy(CeParams::default()),
        opts(1500, 2024),
    ))
    .map_err(err)?;
    let elapsed = started.elapsed();
    let report = r.report.ok_or("no distribution report")?;
    let mass = report.mass_overlapping("s0", 1400.0, 1500.0);
    let detail = format!("{} episodes, mass on [1400, 1500] = {mass:.3}, {elapsed:.2?}", r.table.len());
    if r.table.len() <= 1500 && mass >= 0.6 && elapsed < Duration::from_secs(120) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Every counterexample of a 500-episode uniform stub campaign is
/// satisfied when replayed with ground-truth perception.
fn c5_fault_localization() -> Outcome {
    let r = run_campaign(&campaign("falsif.scn", SamplerChoice::Uniform, opts(500, 5))).map_err(err)?;
    let cex: Vec<ResultRow> = r.table.rows.iter().filter(|r| r.verdict == Verdict::Falsified).cloned().collect();
    if cex.is_empty() || filter_counterexamples(&r.table).len() != cex.len() {
        return Err("campaign produced no counterexamples".into());
    }
    let program = parse_scenario(&std::fs::read_to_string(scenarios().join("falsif.scn")).map_err(err)?).map_err(err)?;
    let gt = replay(
        &cex,
        &presets::phi_eventually(),
        &BuiltinTarget::default(),
        &opts(1, 0),
        Some(&program),
        Override::GroundTruth,
    )
    .map_err(err)?;
    let ok = gt.count(Verdict::Satisfied);
    let detail = format!("{ok}/{} counterexamples satisfied under ground truth", cex.len());
    if ok == cex.len() && gt.len() == cex.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 1,000 ground-truth episodes over the start envelope all satisfy
/// phi_eventually.
fn c6_controller_gate() -> Outcome {
    let mut o = opts(1000, 6);
    o.flags.insert("perception".into(), "ground-truth".into());
    let r = run_campaign(&campaign("falsif.scn", SamplerChoice::Uniform, o)).map_err(err)?;
    let in_envelope = r.table.rows.iter().all(|row| {
        row.real("cte0").is_some_and(|c| c.abs() <= 8.0)
            && row.real("he0").is_some_and(|h| h.abs() <= 30.0)
            && row.real("s0").is_some_and(|s| (0.0..=2000.0).contains(&s))
    });
    let sat = r.table.count(Verdict::Satisfied);
    let worst = r.table.rows.iter().filter_map(|r| r.rho).fold(f64::INFINITY, f64::min);
    let detail = format!("{sat}/{} satisfied, worst rho = {worst:.3}", r.table.len());
    if in_envelope && sat == 1000 && r.table.len() == 1000 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Clear-sky afternoon, Halton over time of day: rho variance with the
/// shadow rule disabled is < 25% of the variance with it enabled.
fn c7_shadow_intervention() -> Outcome {
    let run = |shadows: &str| -> Result<Vec<f64>, String> {
        let mut o = opts(64, 7);
        o.flags.insert("shadows".into(), shadows.into());
        let r = run_campaign(&campaign("shadow.scn", SamplerChoice::Halton { scramble: false }, o)).map_err(err)?;
        r.table.rows.iter().map(|r| r.rho.ok_or("episode without rho".to_string())).collect()
    };
    let (on, off) = (variance(&run("on")?), variance(&run("off")?));
    let detail = format!("var on = {on:.4}, var off = {off:.6}, ratio = {:.5}", off / on);
    if off < 0.25 * on {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 1,000 configs exported from the specialized scenario land in each
/// distance segment within 3% absolute of 0.35 / 0.1 / 0.5 / 0.05.
fn c8_export_frequencies() -> Outcome {
    let program =
        parse_scenario(&std::fs::read_to_string(scenarios().join("specialized.scn")).map_err(err)?).map_err(err)?;
    let configs = export_training_configs(&program, None, 1000, 8).map_err(err)?;
    let edges = [0.0, 400.0, 1200.0, 1600.0, 2000.0];
    let weights = [0.35, 0.1, 0.5, 0.05];
    let mut counts = [0usize; 4];
    for c in &configs {
        let s = c.real("s0").ok_or("missing s0")?;
        let k = (0..4).find(|&k| s >= edges[k] && s <= edges[k + 1]).ok_or("s0 outside segments")?;
        counts[k] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|c| *c as f64 / configs.len() as f64).collect();
    let ok = configs.len() == 1000 && freq.iter().zip(weights).all(|(f, w)| (f - w).abs() <= 0.03);
    let detail = format!("frequencies {freq:?}");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_message(rng: &mut ChaCha8Rng) -> ProtocolMessage {
    let real = |rng: &mut ChaCha8Rng| match rng.random_range(0..4) {
        0 => rng.random_range(-1e6..1e6),
        1 => rng.random::<f64>() * 1e-300,
        2 => f64::from(rng.random_range(-5i32..5)),
        _ => rng.random::<f64>(),
    };
    let text = |rng: &mut ChaCha8Rng| -> String {
        let pool = ['a', 'z', ' ', '"', '\\', '\n', '\t', 'é', '{', ','];
        (0..rng.random_range(0..10)).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    };
    match rng.random_range(0..4) {
        0 => ProtocolMessage::Step {
            t: real(rng),
            signals: (0..rng.random_range(0..5)).map(|i| (format!("s{i}"), real(rng))).collect(),
        },
        1 => ProtocolMessage::Done { status: text(rng) },
        2 => ProtocolMessage::Error { message: text(rng) },
        _ => {
            let mut features = IndexMap::new();
            for i in 0..rng.random_range(0..5) {
                let v = if rng.random_bool(0.5) { Value::Real(real(rng)) } else { Value::Tag(text(rng)) };
                features.insert(format!("f{i}"), v);
            }
            let mut c = TestConfig {
                episode: rng.random(),
                features,
                duration: rng.random_range(0.1..100.0),
                period: rng.random_range(0.01..1.0),
                seed: rng.random(),
                flags: Default::default(),
            };
            if rng.random_bool(0.5) {
                c = c.with_flag("shadows", "off");
            }
            ProtocolMessage::Init { config: c }
        }
    }
}

/// Fixed-seed campaigns reproduce a byte-identical JSONL table; protocol
/// and CSV round trips are identities on randomized inputs.
fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut bytes = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let mut o = opts(200, 99);
        o.output = Some(dir.path().join(name));
        run_campaign(&campaign("falsif.scn", SamplerChoice::Uniform, o)).map_err(err)?;
        bytes.push(std::fs::read(dir.path().join(name)).map_err(err)?);
    }
    if bytes[0] != bytes[1] || bytes[0].is_empty() {
        return Err("campaign tables differ".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let m = random_message(&mut rng);
        let line = encode(&m).map_err(err)?;
        let back = decode(&line).map_err(err)?;
        if back != m || encode(&back).map_err(err)? != line {
            return Err(format!("protocol round trip failed for {line:?}"));
        }
    }

    let table = ResultTable::from_jsonl(&String::from_utf8(bytes[0].clone()).map_err(err)?).map_err(err)?;
    let mut tables = vec![table];
    for _ in 0..50 {
        let rows = (0..rng.random_range(0..20))
            .map(|i| {
                let verdict = [Verdict::Satisfied, Verdict::Falsified, Verdict::Rejected, Verdict::Timeout, Verdict::Error]
                    [rng.random_range(0..5)];
                let rho = match verdict {
                    Verdict::Satisfied => Some(rng.random_range(1e-9..50.0)),
                    Verdict::Falsified => Some(-rng.random_range(0.0..50.0)),
                    _ => None,
                };
                let mut features = IndexMap::new();
                features.insert("time".to_string(), Value::Real(rng.random_range(6.0..18.0)));
                features.insert("clouds".to_string(), Value::Tag(["clear", "stratus"][rng.random_range(0..2)].into()));
                ResultRow {
                    episode: i,
                    features,
                    rho,
                    verdict,
                    seed: rng.random(),
                    wall_ms: rng.random_range(0..10_000),
                    off_runway: rho.map(|_| rng.random_bool(0.1)),
                    message: (verdict == Verdict::Error).then(|| "simulator said \"no\", twice".to_string()),
                }
            })
            .collect();
        tables.push(ResultTable { rows });
    }
    for t in &tables {
        if ResultTable::from_csv(&t.to_csv()).map_err(err)? != *t {
            return Err("CSV round trip failed".into());
        }
    }
    Ok(format!(
        "{} identical bytes twice, 2000 protocol frames, {} CSV tables",
        bytes[0].len(),
        tables.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("monitor sign consistency", c1_sign_consistency),
        ("phi_eventually worked example", c2_worked_example),
        ("Halton spread", c3_halton_spread),
        ("cross-entropy convergence", c4_cross_entropy),
        ("fault localization replay", c5_fault_localization),
        ("controller adequacy gate", c6_controller_gate),
        ("shadow intervention", c7_shadow_intervention),
        ("specialized export frequencies", c8_export_frequencies),
        ("determinism and round trips", c9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(d) => println!("criterion {}: PASS {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
