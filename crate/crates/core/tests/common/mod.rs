#![allow(dead_code)]

use falsify_core::monitor::{Formula, Interval, Margin, Trace};
use rand::Rng;

const SIGNALS: [&str; 2] = ["x", "y"];

fn margin<R: Rng>(rng: &mut R) -> Margin {
    let s = Margin::signal(SIGNALS[rng.random_range(0..2)]);
    // half-integer thresholds so ties with trace values actually happen
    let c = Margin::Const(rng.random_range(-4..=4) as f64 * 0.5);
    match rng.random_range(0..4) {
        0 => Margin::sub(s, c),
        1 => Margin::sub(c, s),
        2 => Margin::sub(c, Margin::abs(s)),
        _ => Margin::sub(s, Margin::signal(SIGNALS[rng.random_range(0..2)])),
    }
}

fn interval<R: Rng>(rng: &mut R) -> Interval {
    let lo = rng.random_range(0..3) as f64;
    if rng.random_bool(0.2) {
        Interval { lo, hi: None }
    } else {
        Interval::bounded(lo, lo + rng.random_range(0..4) as f64)
    }
}

/// Random formula over signals `x` and `y` with nesting depth at most `depth`.
pub fn formula<R: Rng>(rng: &mut R, depth: usize) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        return Formula::Atom(margin(rng));
    }
    let d = depth - 1;
    match rng.random_range(0..6) {
        0 => Formula::not(formula(rng, d)),
        1 => Formula::and(formula(rng, d), formula(rng, d)),
        2 => Formula::or(formula(rng, d), formula(rng, d)),
        3 => Formula::always(interval(rng), formula(rng, d)),
        4 => Formula::eventually(interval(rng), formula(rng, d)),
        _ => Formula::until(interval(rng), formula(rng, d), formula(rng, d)),
    }
}

/// Random trace of 1..=`max_len` samples over `x` and `y`.
pub fn trace<R: Rng>(rng: &mut R, max_len: usize) -> Trace {
    let n = rng.random_range(1..=max_len);
    let mut t = 0.0;
    let mut times = Vec::with_capacity(n);
    for _ in 0..n {
        times.push(t);
        t += [0.5, 1.0, 1.5][rng.random_range(0..3)];
    }
    let col = |rng: &mut R| (0..n).map(|_| rng.random_range(-6..=6) as f64 * 0.5).collect::<Vec<_>>();
    let x = col(rng);
    let y = col(rng);
    Trace::from_columns(times, vec![("x".into(), x), ("y".into(), y)]).unwrap()
}
