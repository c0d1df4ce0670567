use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::GlobalConfig;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "round,wall_clock_s,train_loss,grad_norm_sq,metric";

/// One CSV row. Round 0 describes the initial parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Cumulative seconds spent in the parallel local-update regions.
    pub wall_clock_s: f64,
    pub train_loss: f64,
    pub grad_norm_sq: f64,
    pub metric: f64,
}

/// Per-round history of a run: T + 1 records and parameter snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub config: GlobalConfig,
    pub workload: Value,
    pub records: Vec<RoundRecord>,
    pub params: Vec<Vec<f64>>,
}

/// JSON written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub config: GlobalConfig,
    pub workload: Value,
    pub rounds: usize,
    pub total_wall_clock_s: f64,
    pub final_train_loss: f64,
    pub final_metric: f64,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
}

impl TrainingTrace {
    pub fn rounds(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("a trace always holds the initial record")
    }

    pub fn final_params(&self) -> &[f64] {
        self.params.last().expect("a trace always holds the initial parameters")
    }

    pub fn final_metric(&self) -> f64 {
        self.final_record().metric
    }

    /// Copy with every wall-clock entry set to zero, for byte-comparable output.
    pub fn without_wall_clock(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            r.wall_clock_s = 0.0;
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.records.len());
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            writeln!(s, "{},{},{},{},{}", r.round, r.wall_clock_s, r.train_loss, r.grad_norm_sq, r.metric)
                .expect("writing to a String cannot fail");
        }
        s
    }

    /// Parses CSV produced by [`Self::to_csv`] into records.
    pub fn parse_csv(text: &str) -> Result<Vec<RoundRecord>> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Dataset("trace csv header mismatch".into()));
        }
        lines
            .enumerate()
            .map(|(i, line)| {
                let bad = |msg: &str| Error::Dataset(format!("trace csv line {}: {msg}", i + 2));
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(bad("expected 5 fields"));
                }
                let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad("bad number"));
                Ok(RoundRecord {
                    round: f[0].parse().map_err(|_| bad("bad round"))?,
                    wall_clock_s: num(1)?,
                    train_loss: num(2)?,
                    grad_norm_sq: num(3)?,
                    metric: num(4)?,
                })
            })
            .collect()
    }

    pub fn sidecar(&self) -> TraceSidecar {
        let last = self.final_record();
        TraceSidecar {
            config: self.config.clone(),
            workload: self.workload.clone(),
            rounds: self.rounds(),
            total_wall_clock_s: last.wall_clock_s,
            final_train_loss: last.train_loss,
            final_metric: last.metric,
            initial_params: self.params[0].clone(),
            final_params: self.final_params().to_vec(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.sidecar())? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> TrainingTrace {
        let rec = |round, w| RoundRecord { round, wall_clock_s: w, train_loss: 0.25, grad_norm_sq: 1e-3, metric: 0.5 };
        TrainingTrace {
            config: GlobalConfig::default(),
            workload: serde_json::json!({"workload": "test"}),
            records: vec![rec(0, 0.0), rec(1, 0.125)],
            params: vec![vec![1.0], vec![2.0]],
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = trace();
        let csv = t.to_csv();
        assert!(csv.starts_with("round,wall_clock_s,train_loss,grad_norm_sq,metric\n0,0,0.25,0.001,0.5\n"));
        assert_eq!(TrainingTrace::parse_csv(&csv).unwrap(), t.records);
        assert!(TrainingTrace::parse_csv("nope\n").is_err());
    }

    #[test]
    fn sidecar_fields() {
        let s = trace().sidecar();
        assert_eq!(s.rounds, 1);
        assert_eq!(s.final_params, vec![2.0]);
        assert_eq!(s.total_wall_clock_s, 0.125);
        let back: TraceSidecar = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(trace().without_wall_clock().records.iter().all(|r| r.wall_clock_s == 0.0));
    }
}
