use std::fmt::Write;

use indexmap::IndexMap;

use super::table::{ResultRow, ResultTable, Verdict};
use super::EngineError;
use crate::scenario::FeatureVector;
use crate::value::Value;

/// Half an hour, for binning by time of day in hours.
pub const DEFAULT_BIN_WIDTH: f64 = 0.5;

/// Robustness summary of rows whose parameter falls in `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
}

/// Linear interpolation between closest ranks; `sorted` must be ascending.
fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    Some(if frac == 0.0 {
        sorted[i]
    } else {
        sorted[i] + (sorted[i + 1] - sorted[i]) * frac
    })
}

/// Groups rows that have a robustness value into bins of `width` along
/// `parameter`, covering the observed range. Empty bins inside the range
/// have count 0 and no statistics.
pub fn binned_stats(table: &ResultTable, parameter: &str, width: f64) -> Result<Vec<Bin>, EngineError> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(EngineError::Config(format!("bin width must be positive, got {width}")));
    }
    if !table.is_empty() && !table.rows.iter().any(|r| r.features.contains_key(parameter)) {
        return Err(EngineError::UnknownParameter(parameter.to_string()));
    }
    let mut points = Vec::new();
    for r in table.rows.iter().filter(|r| r.rho.is_some()) {
        match r.features.get(parameter) {
            Some(Value::Real(x)) => points.push((*x, r.rho.unwrap())),
            Some(Value::Tag(_)) => return Err(EngineError::NonNumeric(parameter.to_string())),
            None => {}
        }
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let index = |x: f64| (x / width).floor() as i64;
    let first = points.iter().map(|p| index(p.0)).min().unwrap();
    let last = points.iter().map(|p| index(p.0)).max().unwrap();
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); (last - first + 1) as usize];
    for (x, rho) in points {
        groups[(index(x) - first) as usize].push(rho);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(k, mut g)| {
            g.sort_by(f64::total_cmp);
            let lo = (first + k as i64) as f64 * width;
            Bin {
                lo,
                hi: lo + width,
                count: g.len(),
                median: quantile(&g, 0.5),
                q25: quantile(&g, 0.25),
                q75: quantile(&g, 0.75),
            }
        })
        .collect())
}

/// Falsified rows, worst (lowest robustness) first.
pub fn filter_counterexamples(table: &ResultTable) -> Vec<FeatureVector> {
    let mut rows: Vec<&ResultRow> = table.rows.iter().filter(|r| r.verdict == Verdict::Falsified).collect();
    rows.sort_by(|a, b| a.rho.unwrap().total_cmp(&b.rho.unwrap()));
    rows.into_iter().map(ResultRow::feature_vector).collect()
}

/// Scatter of robustness against `parameter` with a median line per
/// series. Rows are split into series by the tag parameter `series_by`,
/// or form a single series.
pub fn svg_plot(
    table: &ResultTable,
    parameter: &str,
    width: f64,
    series_by: Option<&str>,
) -> Result<String, EngineError> {
    let mut series: IndexMap<String, ResultTable> = IndexMap::new();
    for r in &table.rows {
        let key = match series_by {
            None => "all".to_string(),
            Some(s) => match r.features.get(s) {
                Some(v) => v.to_string(),
                None => continue,
            },
        };
        series.entry(key).or_default().rows.push(r.clone());
    }
    let scored: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| Some((r.real(parameter)?, r.rho?)))
        .collect();
    // validates the parameter
    binned_stats(table, parameter, width)?;

    let (w, h, m) = (640.0, 400.0, 40.0);
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else if lo.is_finite() {
            (lo - 1.0, lo + 1.0)
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = span(&mut scored.iter().map(|p| p.0));
    let (y0, y1) = span(&mut scored.iter().map(|p| p.1).chain([0.0]));
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r##"<line x1="{m}" y1="{y}" x2="{x2}" y2="{y}" stroke="#888" stroke-dasharray="4 3"/>"##,
        y = sy(0.0),
        x2 = w - m
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{parameter}</text>"#,
        w / 2.0,
        h - 8.0
    );
    let _ = writeln!(out, r#"<text x="8" y="{}" font-size="12">rho</text>"#, m - 10.0);
    for (k, (name, sub)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(out, r#"<g class="series" data-name="{}">"#, escape(name));
        for r in &sub.rows {
            if let (Some(x), Some(rho)) = (r.real(parameter), r.rho) {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}" fill-opacity="0.4"/>"#,
                    sx(x),
                    sy(rho)
                );
            }
        }
        let pts: Vec<String> = binned_stats(sub, parameter, width)?
            .iter()
            .filter_map(|b| b.median.map(|md| format!("{:.2},{:.2}", sx((b.lo + b.hi) / 2.0), sy(md))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="median" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;")
}
