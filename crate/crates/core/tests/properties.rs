mod common;

use falsify_core::monitor::{robustness, satisfied, Formula, Margin};
use falsify_core::samplers::{
    ce_update, CeParams, CrossEntropyState, Dimension, DomainSpec, Feedback, SamplerChoice,
};
use falsify_core::scenario::{parse_scenario, sample, FixedExternals, Sample};
use falsify_core::Value;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64) -> (Formula, falsify_core::monitor::Trace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (common::formula(&mut rng, 3), common::trace(&mut rng, 8))
}

fn domain() -> DomainSpec {
    DomainSpec::new(vec![
        ("s0".into(), Dimension::Continuous { lo: 0.0, hi: 2000.0 }),
        ("clouds".into(), Dimension::Discrete(vec!["clear".into(), "overcast".into(), "stratus".into()])),
    ])
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn sign_consistency(seed in any::<u64>()) {
        let (f, tr) = pair(seed);
        let rho = robustness(&f, &tr).unwrap().value();
        if rho != 0.0 {
            prop_assert_eq!(satisfied(&f, &tr).unwrap(), rho > 0.0);
        }
    }

    #[test]
    fn negation_duality(seed in any::<u64>()) {
        let (f, tr) = pair(seed);
        let rho = robustness(&f, &tr).unwrap().value();
        let neg = robustness(&Formula::not(f), &tr).unwrap().value();
        prop_assert_eq!(neg, -rho);
    }

    #[test]
    fn raising_atoms_never_lowers_robustness(seed in any::<u64>(), c in 0u8..8) {
        let (f, tr) = pair(seed);
        prop_assume!(!f.has_negation());
        let lifted = f.map_atoms(&|m| Margin::add(m.clone(), Margin::Const(f64::from(c) * 0.25)));
        let (a, b) = (robustness(&f, &tr).unwrap().value(), robustness(&lifted, &tr).unwrap().value());
        prop_assert!(b >= a, "{} < {}", b, a);
    }

    #[test]
    fn ce_update_keeps_distributions_normalized(
        rhos in proptest::collection::vec(proptest::option::of(-5.0..5.0f64), 1..60),
        seed in any::<u64>(),
    ) {
        let state = CrossEntropyState::new(&domain(), CeParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sampler = SamplerChoice::Uniform.build(domain(), 0).unwrap();
        let batch: Vec<_> = rhos
            .iter()
            .map(|r| (sampler.next_point(&mut rng), r.map_or(Feedback::Rejected, Feedback::Robustness)))
            .collect();
        let mut next = state;
        for _ in 0..40 {
            next = ce_update(&next, &batch);
        }
        for d in &next.dims {
            let sum: f64 = d.probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "{} sums to {}", d.name, sum);
            prop_assert!(d.probs.iter().all(|p| *p > 0.0));
        }
    }

    #[test]
    fn samplers_are_deterministic(seed in any::<u64>(), which in 0usize..4) {
        let choice = [
            SamplerChoice::Uniform,
            SamplerChoice::Halton { scramble: false },
            SamplerChoice::Halton { scramble: true },
            SamplerChoice::CrossEntropy(CeParams::default()),
        ][which].clone();
        let draw = || {
            let mut s = choice.build(domain(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..30)
                .map(|i| {
                    let p = s.next_point(&mut rng);
                    s.record_feedback(&p, Feedback::Robustness(i as f64 - 15.0));
                    p
                })
                .collect::<Vec<_>>()
        };
        let (a, b) = (draw(), draw());
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|p| domain().contains(p)));
    }

    #[test]
    fn scenario_sampling_is_deterministic(seed in any::<u64>()) {
        let p = parse_scenario(
            "t = Uniform(6, 18)\nw = Options({0: 2, 1: 1})\nc = if w == 1 then \"stratus\" else \"clear\"\nrequire t < 17\n",
        )
        .unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&p, &mut FixedExternals::new(vec![]), &mut rng, 1000).unwrap()
        };
        let (a, b) = (run(), run());
        match (&a, &b) {
            (Sample::Accepted(x), Sample::Accepted(y)) => {
                prop_assert!(x.same_values(y));
                prop_assert!(matches!(x.values["t"], Value::Real(t) if (6.0..17.0).contains(&t)));
            }
            _ => prop_assert!(false, "rejected"),
        }
    }
}
