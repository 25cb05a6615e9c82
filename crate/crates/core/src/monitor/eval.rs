use super::formula::{Formula, Interval, Margin};
use super::trace::Trace;
use super::{MonitorError, Robustness, EMPTY_WINDOW_SENTINEL};

/// Slack on window edges so that e.g. `0.1 * 3 + 10` still includes the
/// sample stamped `10.3`.
const WINDOW_EPS: f64 = 1e-9;

/// Index range `[start, end)` of samples with `t_j` in `[t_i + lo, t_i + hi]`.
fn window(times: &[f64], i: usize, iv: &Interval) -> (usize, usize) {
    let t = times[i];
    let from = t + iv.lo - WINDOW_EPS;
    let start = i + times[i..].partition_point(|&tj| tj < from);
    let end = match iv.hi {
        None => times.len(),
        Some(h) => {
            let to = t + h + WINDOW_EPS;
            i + times[i..].partition_point(|&tj| tj <= to)
        }
    };
    (start, end.max(start))
}

fn check_signals(formula: &Formula, trace: &Trace) -> Result<(), MonitorError> {
    if trace.is_empty() {
        return Err(MonitorError::EmptyTrace);
    }
    for s in formula.signals() {
        if trace.signal(s).is_none() {
            return Err(MonitorError::UnknownSignal(s.to_string()));
        }
    }
    Ok(())
}

fn margin_series(m: &Margin, trace: &Trace) -> Vec<f64> {
    let zip = |a: &Margin, b: &Margin, f: fn(f64, f64) -> f64| {
        margin_series(a, trace)
            .into_iter()
            .zip(margin_series(b, trace))
            .map(|(x, y)| f(x, y))
            .collect()
    };
    match m {
        Margin::Const(c) => vec![*c; trace.len()],
        Margin::Signal(s) => trace.signal(s).expect("checked").to_vec(),
        Margin::Neg(a) => margin_series(a, trace).into_iter().map(|x| -x).collect(),
        Margin::Abs(a) => margin_series(a, trace).into_iter().map(f64::abs).collect(),
        Margin::Add(a, b) => zip(a, b, |x, y| x + y),
        Margin::Sub(a, b) => zip(a, b, |x, y| x - y),
        Margin::Mul(a, b) => zip(a, b, |x, y| x * y),
        Margin::Div(a, b) => zip(a, b, |x, y| x / y),
        Margin::Min(a, b) => zip(a, b, f64::min),
        Margin::Max(a, b) => zip(a, b, f64::max),
    }
}

/// Robustness of `formula` at every sample of `trace`.
pub fn robustness_series(formula: &Formula, trace: &Trace) -> Result<Vec<f64>, MonitorError> {
    check_signals(formula, trace)?;
    series(formula, trace)
}

fn series(f: &Formula, trace: &Trace) -> Result<Vec<f64>, MonitorError> {
    let times = trace.times();
    let n = times.len();
    Ok(match f {
        Formula::Atom(m) => {
            let s = margin_series(m, trace);
            if let Some(i) = s.iter().position(|v| !v.is_finite()) {
                return Err(MonitorError::NonFinite(format!("atom `{m}` at sample {i}")));
            }
            s
        }
        Formula::Not(a) => series(a, trace)?.into_iter().map(|x| -x).collect(),
        Formula::And(a, b) => {
            let (a, b) = (series(a, trace)?, series(b, trace)?);
            a.into_iter().zip(b).map(|(x, y)| x.min(y)).collect()
        }
        Formula::Or(a, b) => {
            let (a, b) = (series(a, trace)?, series(b, trace)?);
            a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect()
        }
        Formula::Always(iv, a) => {
            let sub = series(a, trace)?;
            (0..n)
                .map(|i| {
                    let (s, e) = window(times, i, iv);
                    sub[s..e].iter().copied().fold(EMPTY_WINDOW_SENTINEL, f64::min)
                })
                .collect()
        }
        Formula::Eventually(iv, a) => {
            let sub = series(a, trace)?;
            (0..n)
                .map(|i| {
                    let (s, e) = window(times, i, iv);
                    sub[s..e].iter().copied().fold(-EMPTY_WINDOW_SENTINEL, f64::max)
                })
                .collect()
        }
        Formula::Until(iv, a, b) => {
            let (lhs, rhs) = (series(a, trace)?, series(b, trace)?);
            (0..n)
                .map(|i| {
                    let (s, e) = window(times, i, iv);
                    let mut best = -EMPTY_WINDOW_SENTINEL;
                    // running min of lhs over [i, j)
                    let mut prefix = f64::INFINITY;
                    for j in i..e {
                        if j >= s {
                            best = best.max(rhs[j].min(prefix));
                        }
                        prefix = prefix.min(lhs[j]);
                    }
                    best
                })
                .collect()
        }
    })
}

/// Robustness of `formula` evaluated at the first sample of `trace`.
pub fn robustness(formula: &Formula, trace: &Trace) -> Result<Robustness, MonitorError> {
    Ok(Robustness(robustness_series(formula, trace)?[0]))
}

/// Classical boolean semantics over the same sample windows.
pub fn satisfied(formula: &Formula, trace: &Trace) -> Result<bool, MonitorError> {
    check_signals(formula, trace)?;
    Ok(bool_series(formula, trace)?[0])
}

fn bool_series(f: &Formula, trace: &Trace) -> Result<Vec<bool>, MonitorError> {
    let times = trace.times();
    let n = times.len();
    Ok(match f {
        Formula::Atom(m) => {
            let s = margin_series(m, trace);
            if let Some(i) = s.iter().position(|v| !v.is_finite()) {
                return Err(MonitorError::NonFinite(format!("atom `{m}` at sample {i}")));
            }
            s.into_iter().map(|v| v >= 0.0).collect()
        }
        Formula::Not(a) => bool_series(a, trace)?.into_iter().map(|x| !x).collect(),
        Formula::And(a, b) => {
            let (a, b) = (bool_series(a, trace)?, bool_series(b, trace)?);
            a.into_iter().zip(b).map(|(x, y)| x && y).collect()
        }
        Formula::Or(a, b) => {
            let (a, b) = (bool_series(a, trace)?, bool_series(b, trace)?);
            a.into_iter().zip(b).map(|(x, y)| x || y).collect()
        }
        Formula::Always(iv, a) => {
            let sub = bool_series(a, trace)?;
            (0..n)
                .map(|i| {
                    let (s, e) = window(times, i, iv);
                    sub[s..e].iter().all(|x| *x)
                })
                .collect()
        }
        Formula::Eventually(iv, a) => {
            let sub = bool_series(a, trace)?;
            (0..n)
                .map(|i| {
                    let (s, e) = window(times, i, iv);
                    sub[s..e].iter().any(|x| *x)
                })
                .collect()
        }
        Formula::Until(iv, a, b) => {
            let (lhs, rhs) = (bool_series(a, trace)?, bool_series(b, trace)?);
            (0..n)
                .map(|i| {
                    let (s, e) = window(times, i, iv);
                    (s..e).any(|j| rhs[j] && lhs[i..j].iter().all(|x| *x))
                })
                .collect()
        }
    })
}
