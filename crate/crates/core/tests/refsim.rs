use std::collections::BTreeMap;

use falsify_core::monitor::{presets, robustness, satisfied};
use falsify_core::refsim::{mode_for, run_episode, FaultProfile, Noise, PerceptionMode, TaxiSim};
use falsify_core::simbridge::{InProcess, SimulatorTarget, TestConfig};
use falsify_core::Value;
use indexmap::IndexMap;
use proptest::prelude::*;

fn config(pairs: &[(&str, Value)], seed: u64) -> TestConfig {
    let features: IndexMap<String, Value> = pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    TestConfig {
        episode: 0,
        features,
        duration: 30.0,
        period: 0.1,
        seed,
        flags: BTreeMap::new(),
    }
}

fn pose(s0: f64, cte0: f64, he0: f64, time: f64, clouds: &str) -> TestConfig {
    config(
        &[
            ("s0", s0.into()),
            ("cte0", cte0.into()),
            ("he0", he0.into()),
            ("time", time.into()),
            ("clouds", clouds.into()),
        ],
        7,
    )
}

#[test]
fn thirty_seconds_is_301_samples() {
    let tr = run_episode(&pose(100.0, 1.0, 0.0, 10.0, "overcast"), PerceptionMode::GroundTruth).unwrap();
    assert_eq!(tr.len(), 301);
    assert_eq!(tr.times()[0], 0.0);
    assert!((tr.times()[300] - 30.0).abs() < 1e-9);
}

#[test]
fn equilibrium_holds() {
    let tr = run_episode(&pose(100.0, 0.0, 0.0, 10.0, "overcast"), PerceptionMode::GroundTruth).unwrap();
    assert!(tr.signal("cte").unwrap().iter().all(|c| *c == 0.0));
    assert_eq!(robustness(&presets::phi_always(), &tr).unwrap().value(), 1.5);
}

#[test]
fn converges_from_eight_meters() {
    let tr = run_episode(&pose(100.0, 8.0, 0.0, 10.0, "overcast"), PerceptionMode::GroundTruth).unwrap();
    assert!(satisfied(&presets::phi_eventually(), &tr).unwrap());
    assert!(robustness(&presets::phi_eventually(), &tr).unwrap().value() > 0.0);
}

#[test]
fn intersection_start_fails_under_stub() {
    let c = pose(1430.0, 0.0, 0.0, 10.0, "overcast");
    let stub = PerceptionMode::Stub(FaultProfile::default_profile());
    let tr = run_episode(&c, stub).unwrap();
    assert!(robustness(&presets::phi_eventually(), &tr).unwrap().value() < 0.0);
    let gt = run_episode(&c, PerceptionMode::GroundTruth).unwrap();
    assert!(robustness(&presets::phi_eventually(), &gt).unwrap().value() > 0.0);
}

#[test]
fn in_process_target_matches_run_episode() {
    let c = pose(700.0, -3.0, 12.0, 14.3, "clear");
    let mode = mode_for(&c, &FaultProfile::default_profile()).unwrap();
    let direct = run_episode(&c, mode).unwrap();
    let out = InProcess::new(TaxiSim::default()).run(&c).unwrap();
    assert!(out.trace().unwrap().bit_eq(&direct));
}

#[test]
fn deterministic_with_noise() {
    let c = pose(300.0, 2.0, -5.0, 6.5, "clear");
    let mode = PerceptionMode::Stub(FaultProfile::default_profile());
    let a = run_episode(&c, mode.clone()).unwrap();
    let b = run_episode(&c, mode.clone()).unwrap();
    assert!(a.bit_eq(&b));
    let mut other = c.clone();
    other.seed = 8;
    assert!(!run_episode(&other, mode).unwrap().bit_eq(&a));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mirror_symmetry(cte0 in -8.0..8.0f64, he0 in -30.0..30.0f64, s0 in 0.0..2000.0f64, noiseless_stub in any::<bool>()) {
        let mode = if noiseless_stub {
            // intersection bias is not symmetric, so keep only rule-free perception
            let mut p = FaultProfile::default_profile();
            p.rules.clear();
            p.noise = Noise::default();
            PerceptionMode::Stub(p)
        } else {
            PerceptionMode::GroundTruth
        };
        let a = run_episode(&pose(s0, cte0, he0, 10.0, "overcast"), mode.clone()).unwrap();
        let b = run_episode(&pose(s0, -cte0, -he0, 10.0, "overcast"), mode).unwrap();
        let (ca, cb) = (a.signal("cte").unwrap(), b.signal("cte").unwrap());
        for (x, y) in ca.iter().zip(cb) {
            prop_assert_eq!(*x, -*y);
        }
        prop_assert_eq!(a.signal("s").unwrap(), b.signal("s").unwrap());
    }
}
