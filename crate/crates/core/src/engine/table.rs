use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::scenario::{FeatureVector, Provenance};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Falsified,
    Rejected,
    Timeout,
    Error,
}

impl Verdict {
    pub fn from_rho(rho: f64) -> Self {
        if rho <= 0.0 {
            Verdict::Falsified
        } else {
            Verdict::Satisfied
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Falsified => "falsified",
            Verdict::Rejected => "rejected",
            Verdict::Timeout => "timeout",
            Verdict::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "satisfied" => Verdict::Satisfied,
            "falsified" => Verdict::Falsified,
            "rejected" => Verdict::Rejected,
            "timeout" => Verdict::Timeout,
            "error" => Verdict::Error,
            _ => return None,
        })
    }
}

/// One episode of a campaign.
///
/// Rejected rows hold only the external values that were tried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub episode: u64,
    pub features: IndexMap<String, Value>,
    pub rho: Option<f64>,
    pub verdict: Verdict,
    /// Simulator seed; replaying with it reproduces the episode.
    pub seed: u64,
    pub wall_ms: u64,
    /// Whether the plane left the runway, when the trace reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub off_runway: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ResultRow {
    pub fn real(&self, name: &str) -> Option<f64> {
        self.features.get(name).and_then(Value::as_real)
    }

    pub fn feature_vector(&self) -> FeatureVector {
        FeatureVector::new(self.features.clone()).with_provenance(Provenance {
            sampler: String::new(),
            index: self.episode,
            seed: self.seed,
        })
    }

    fn check(&self) -> Result<(), String> {
        let ok = match (self.verdict, self.rho) {
            (Verdict::Satisfied | Verdict::Falsified, Some(r)) => r.is_finite() && Verdict::from_rho(r) == self.verdict,
            (Verdict::Rejected | Verdict::Timeout | Verdict::Error, None) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("episode {}: verdict {:?} inconsistent with rho {:?}", self.episode, self.verdict, self.rho))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Feature names in first-seen order.
    pub fn parameters(&self) -> Vec<String> {
        let mut names: IndexMap<&str, ()> = IndexMap::new();
        for r in &self.rows {
            for k in r.features.keys() {
                names.entry(k.as_str()).or_default();
            }
        }
        names.into_keys().map(str::to_string).collect()
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.rows.iter().filter(|r| r.verdict == verdict).count()
    }

    /// Falsified rows over rows that have a robustness value.
    pub fn falsification_rate(&self) -> f64 {
        let scored = self.rows.iter().filter(|r| r.rho.is_some()).count();
        if scored == 0 {
            return 0.0;
        }
        self.count(Verdict::Falsified) as f64 / scored as f64
    }

    pub fn off_runway_rate(&self) -> Option<f64> {
        let known: Vec<bool> = self.rows.iter().filter_map(|r| r.off_runway).collect();
        (!known.is_empty()).then(|| known.iter().filter(|b| **b).count() as f64 / known.len() as f64)
    }

    pub fn row_to_jsonl(row: &ResultRow) -> String {
        let mut s = serde_json::to_string(row).expect("rows serialize");
        s.push('\n');
        s
    }

    pub fn to_jsonl(&self) -> String {
        self.rows.iter().map(Self::row_to_jsonl).collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EngineError> {
        Self::read_jsonl(text.as_bytes())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, EngineError> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: ResultRow =
                serde_json::from_str(&line).map_err(|e| EngineError::Table(format!("line {}: {e}", i + 1)))?;
            row.check().map_err(EngineError::Table)?;
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), EngineError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    /// CSV with columns `episode`, each parameter, `rho`, `verdict`, `seed`,
    /// `wall_ms`, `off_runway`, `message`. Missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let params = self.parameters();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["episode".to_string()];
        header.extend(params.iter().cloned());
        header.extend(["rho", "verdict", "seed", "wall_ms", "off_runway", "message"].map(String::from));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.episode.to_string()];
            for p in &params {
                rec.push(match r.features.get(p) {
                    None => String::new(),
                    Some(Value::Real(x)) => format!("{x:?}"),
                    Some(Value::Tag(t)) => t.clone(),
                });
            }
            rec.push(r.rho.map(|x| format!("{x:?}")).unwrap_or_default());
            rec.push(r.verdict.as_str().to_string());
            rec.push(r.seed.to_string());
            rec.push(r.wall_ms.to_string());
            rec.push(r.off_runway.map(|b| b.to_string()).unwrap_or_default());
            rec.push(r.message.clone().unwrap_or_default());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Parses [`ResultTable::to_csv`] output. Cells that parse as numbers
    /// are read back as reals, everything else as tags.
    pub fn from_csv(text: &str) -> Result<Self, EngineError> {
        let bad = |m: String| EngineError::Table(m);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
        let fixed = ["rho", "verdict", "seed", "wall_ms", "off_runway", "message"];
        if header.len() < fixed.len() + 1 || header[0] != "episode" || header[header.len() - fixed.len()..] != fixed {
            return Err(bad("unexpected CSV header".into()));
        }
        let params = &header[1..header.len() - fixed.len()];
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let cell = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<u64, EngineError> {
                cell(i).parse().map_err(|_| bad(format!("bad integer `{}`", cell(i))))
            };
            let mut features = IndexMap::new();
            for (j, p) in params.iter().enumerate() {
                let c = cell(j + 1);
                if c.is_empty() {
                    continue;
                }
                let v = c.parse::<f64>().map(Value::Real).unwrap_or_else(|_| Value::Tag(c.to_string()));
                features.insert(p.clone(), v);
            }
            let k = params.len() + 1;
            let rho = match cell(k) {
                "" => None,
                s => Some(s.parse::<f64>().map_err(|_| bad(format!("bad rho `{s}`")))?),
            };
            let verdict = Verdict::parse(cell(k + 1)).ok_or_else(|| bad(format!("bad verdict `{}`", cell(k + 1))))?;
            let off_runway = match cell(k + 4) {
                "" => None,
                s => Some(s.parse::<bool>().map_err(|_| bad(format!("bad off_runway `{s}`")))?),
            };
            let message = Some(cell(k + 5).to_string()).filter(|m| !m.is_empty());
            let row = ResultRow {
                episode: num(0)?,
                features,
                rho,
                verdict,
                seed: num(k + 2)?,
                wall_ms: num(k + 3)?,
                off_runway,
                message,
            };
            row.check().map_err(bad)?;
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

/// Appends rows to a JSON-lines file, flushing after each one.
pub(crate) struct RowSink {
    file: Option<File>,
}

impl RowSink {
    pub(crate) fn create(path: Option<&Path>) -> Result<Self, EngineError> {
        Ok(Self {
            file: path.map(File::create).transpose()?,
        })
    }

    pub(crate) fn append(&mut self, row: &ResultRow) -> Result<(), EngineError> {
        if let Some(f) = &mut self.file {
            f.write_all(ResultTable::row_to_jsonl(row).as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(episode: u64, t: f64, rho: Option<f64>, verdict: Verdict) -> ResultRow {
        let mut features = IndexMap::new();
        features.insert("time".to_string(), Value::Real(t));
        features.insert("clouds".to_string(), Value::Tag("clear".into()));
        ResultRow {
            episode,
            features,
            rho,
            verdict,
            seed: 9,
            wall_ms: 3,
            off_runway: rho.map(|r| r < -10.0),
            message: (verdict == Verdict::Error).then(|| "boom, \"quoted\"".to_string()),
        }
    }

    #[test]
    fn csv_round_trip_and_column_order() {
        let t = ResultTable {
            rows: vec![
                row(0, 6.1, Some(-1.0), Verdict::Falsified),
                row(1, 0.1, Some(0.30000000000000004), Verdict::Satisfied),
                row(2, 7.0, None, Verdict::Error),
                row(3, 1e300, None, Verdict::Rejected),
            ],
        };
        let csv = t.to_csv();
        assert!(csv.starts_with("episode,time,clouds,rho,verdict,seed,wall_ms,off_runway,message\n"));
        assert_eq!(ResultTable::from_csv(&csv).unwrap(), t);
        assert_eq!(ResultTable::from_jsonl(&t.to_jsonl()).unwrap(), t);
    }

    #[test]
    fn inconsistent_rows_rejected() {
        let mut r = row(0, 6.0, Some(0.0), Verdict::Satisfied);
        assert!(ResultTable::from_jsonl(&ResultTable::row_to_jsonl(&r)).is_err());
        r.verdict = Verdict::Falsified;
        assert!(ResultTable::from_jsonl(&ResultTable::row_to_jsonl(&r)).is_ok());
        r.verdict = Verdict::Timeout;
        assert!(ResultTable::from_jsonl(&ResultTable::row_to_jsonl(&r)).is_err());
    }
}
