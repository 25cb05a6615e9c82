use std::collections::BTreeMap;

use super::MonitorError;

/// Time-stamped samples of named real-valued signals.
///
/// Stored column-wise. Non-empty, strictly increasing timestamps, and every
/// sample carries the same set of signal names.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Trace {
    /// Builds a trace from `(t, signals)` samples.
    pub fn from_samples<I>(samples: I) -> Result<Self, MonitorError>
    where
        I: IntoIterator<Item = (f64, BTreeMap<String, f64>)>,
    {
        let mut b = TraceBuilder::default();
        for (t, s) in samples {
            b.push(t, &s)?;
        }
        b.finish()
    }

    pub fn from_columns(times: Vec<f64>, signals: Vec<(String, Vec<f64>)>) -> Result<Self, MonitorError> {
        if times.is_empty() {
            return Err(MonitorError::EmptyTrace);
        }
        check_times(&times)?;
        let mut names = Vec::with_capacity(signals.len());
        let mut columns = Vec::with_capacity(signals.len());
        for (name, col) in signals {
            if col.len() != times.len() {
                return Err(MonitorError::InconsistentSignals(format!(
                    "signal `{name}` has {} samples, expected {}",
                    col.len(),
                    times.len()
                )));
            }
            if names.contains(&name) {
                return Err(MonitorError::InconsistentSignals(format!("signal `{name}` given twice")));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(MonitorError::NonFinite(format!("signal `{name}` at sample {i}")));
            }
            names.push(name);
            columns.push(col);
        }
        Ok(Self { times, names, columns })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn signal(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    /// Signals of sample `i`.
    pub fn sample(&self, i: usize) -> BTreeMap<String, f64> {
        self.names
            .iter()
            .zip(&self.columns)
            .map(|(n, c)| (n.clone(), c[i]))
            .collect()
    }

    /// Bitwise equality of timestamps and all signal values.
    pub fn bit_eq(&self, other: &Trace) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.names == other.names
            && bits(&self.times) == bits(&other.times)
            && self.columns.iter().zip(&other.columns).all(|(a, b)| bits(a) == bits(b))
    }

    /// `t,name1,name2,...` header followed by one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&format!("{:?}", self.times[i]));
            for c in &self.columns {
                out.push_str(&format!(",{:?}", c[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, MonitorError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(MonitorError::EmptyTrace)?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") {
            return Err(MonitorError::Csv("header must start with `t`".into()));
        }
        let names: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
        let mut times = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(MonitorError::Csv(format!("row {} has {} fields", row + 1, fields.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| MonitorError::Csv(format!("row {}: bad number `{s}`", row + 1)))
            };
            times.push(parse(fields[0])?);
            for (c, f) in columns.iter_mut().zip(&fields[1..]) {
                c.push(parse(f)?);
            }
        }
        Self::from_columns(times, names.into_iter().zip(columns).collect())
    }
}

fn check_times(times: &[f64]) -> Result<(), MonitorError> {
    if let Some(i) = times.iter().position(|t| !t.is_finite()) {
        return Err(MonitorError::NonFinite(format!("timestamp {i}")));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(MonitorError::NonIncreasing { index: i + 1 });
    }
    Ok(())
}

/// Incremental trace construction, validating each sample as it arrives.
#[derive(Debug, Clone, Default)]
pub struct TraceBuilder {
    times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl TraceBuilder {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn push(&mut self, t: f64, signals: &BTreeMap<String, f64>) -> Result<(), MonitorError> {
        if !t.is_finite() {
            return Err(MonitorError::NonFinite(format!("timestamp {}", self.times.len())));
        }
        if let Some(last) = self.last_time() {
            if t <= last {
                return Err(MonitorError::NonIncreasing { index: self.times.len() });
            }
        }
        if self.times.is_empty() {
            self.names = signals.keys().cloned().collect();
            self.columns = vec![Vec::new(); self.names.len()];
        } else if signals.len() != self.names.len() || !self.names.iter().all(|n| signals.contains_key(n)) {
            return Err(MonitorError::InconsistentSignals(format!(
                "sample {} has signals {:?}, expected {:?}",
                self.times.len(),
                signals.keys().collect::<Vec<_>>(),
                self.names
            )));
        }
        if let Some((n, _)) = signals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(MonitorError::NonFinite(format!("signal `{n}` at sample {}", self.times.len())));
        }
        self.times.push(t);
        for (n, c) in self.names.iter().zip(self.columns.iter_mut()) {
            c.push(signals[n]);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Trace, MonitorError> {
        if self.times.is_empty() {
            return Err(MonitorError::EmptyTrace);
        }
        Ok(Trace {
            times: self.times,
            names: self.names,
            columns: self.columns,
        })
    }
}
