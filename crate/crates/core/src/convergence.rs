//! Best-so-far convergence traces and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "fe,best";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub fe: u64,
    pub best: f64,
}

/// `(FE count, best-so-far objective)` records. FE counts strictly increase and
/// objectives never increase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLog {
    records: Vec<LogRecord>,
}

impl ConvergenceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<LogRecord> {
        self.records.last().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record, rejecting anything that would break the ordering invariants.
    pub fn push(&mut self, fe: u64, best: f64) -> Result<()> {
        if let Some(last) = self.records.last() {
            if fe <= last.fe {
                return Err(Error::invalid(format!(
                    "fe counts must increase ({fe} after {})",
                    last.fe
                )));
            }
            if best > last.best {
                return Err(Error::invalid("best-so-far objective increased"));
            }
        }
        self.records.push(LogRecord { fe, best });
        Ok(())
    }

    /// Best-so-far value at `fe` by step interpolation. Before the first record
    /// the first value is used.
    pub fn value_at(&self, fe: u64) -> Option<f64> {
        let first = self.records.first()?;
        let idx = self.records.partition_point(|r| r.fe <= fe);
        Some(if idx == 0 { first.best } else { self.records[idx - 1].best })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{}", r.fe, format_real(r.best));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(CSV_HEADER) => {}
            other => {
                return Err(Error::invalid(format!(
                    "expected header `{CSV_HEADER}`, got {other:?}"
                )))
            }
        }
        let mut log = ConvergenceLog::new();
        for (i, line) in lines.enumerate() {
            let bad = || Error::invalid(format!("malformed convergence row {}: `{line}`", i + 2));
            let (fe, best) = line.split_once(',').ok_or_else(bad)?;
            let fe: u64 = fe.parse().map_err(|_| bad())?;
            let best: f64 = best.parse().map_err(|_| bad())?;
            log.push(fe, best)?;
        }
        Ok(log)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Scientific notation with 17 significant digits; round-trips every `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Tracks the best objective seen so far and writes the convergence log:
/// one record per improvement plus a checkpoint every `checkpoint_every` FEs.
#[derive(Debug, Clone)]
pub struct BestTracker {
    best_x: Vec<f64>,
    best_f: f64,
    fe_used: u64,
    max_fes: u64,
    checkpoint_every: u64,
    log: ConvergenceLog,
}

impl BestTracker {
    pub fn new(max_fes: u64, checkpoint_every: u64) -> Self {
        Self {
            best_x: Vec::new(),
            best_f: f64::INFINITY,
            fe_used: 0,
            max_fes,
            checkpoint_every: checkpoint_every.max(1),
            log: ConvergenceLog::new(),
        }
    }

    pub fn fe_used(&self) -> u64 {
        self.fe_used
    }

    pub fn max_fes(&self) -> u64 {
        self.max_fes
    }

    pub fn exhausted(&self) -> bool {
        self.fe_used >= self.max_fes
    }

    pub fn best_f(&self) -> f64 {
        self.best_f
    }

    pub fn best_x(&self) -> &[f64] {
        &self.best_x
    }

    pub fn log(&self) -> &ConvergenceLog {
        &self.log
    }

    pub fn into_parts(self) -> (Vec<f64>, f64, u64, ConvergenceLog) {
        (self.best_x, self.best_f, self.fe_used, self.log)
    }

    /// Fails with [`Error::BudgetExhausted`] if no evaluation is left.
    pub fn reserve(&self) -> Result<()> {
        if self.exhausted() {
            Err(Error::BudgetExhausted)
        } else {
            Ok(())
        }
    }

    /// Records one completed evaluation of `x` with value `f`.
    pub fn record(&mut self, x: &[f64], f: f64) {
        self.fe_used += 1;
        let improved = f < self.best_f;
        if improved {
            self.best_f = f;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
        }
        if improved || self.fe_used % self.checkpoint_every == 0 {
            self.log
                .push(self.fe_used, self.best_f)
                .expect("tracker keeps the log ordered");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_enforces_order() {
        let mut log = ConvergenceLog::new();
        log.push(1, 5.0).unwrap();
        assert!(log.push(1, 4.0).is_err());
        assert!(log.push(2, 6.0).is_err());
        log.push(3, 5.0).unwrap();
    }

    #[test]
    fn step_interpolation() {
        let mut log = ConvergenceLog::new();
        log.push(2, 10.0).unwrap();
        log.push(5, 4.0).unwrap();
        assert_eq!(log.value_at(1), Some(10.0));
        assert_eq!(log.value_at(4), Some(10.0));
        assert_eq!(log.value_at(5), Some(4.0));
        assert_eq!(log.value_at(100), Some(4.0));
        assert_eq!(ConvergenceLog::new().value_at(3), None);
    }

    #[test]
    fn csv_layout() {
        let mut log = ConvergenceLog::new();
        log.push(1, 0.1).unwrap();
        log.push(50, 0.0).unwrap();
        let csv = log.to_csv();
        assert_eq!(csv, "fe,best\n1,1.0000000000000001e-1\n50,0.0000000000000000e0\n");
        assert_eq!(ConvergenceLog::from_csv(&csv).unwrap(), log);
        assert!(ConvergenceLog::from_csv("fe;best\n").is_err());
    }

    #[test]
    fn tracker_checkpoints() {
        let mut t = BestTracker::new(10, 3);
        for f in [5.0, 6.0, 7.0, 8.0, 4.0, 9.0] {
            t.reserve().unwrap();
            t.record(&[f], f);
        }
        let fes: Vec<u64> = t.log().records().iter().map(|r| r.fe).collect();
        assert_eq!(fes, vec![1, 3, 5, 6]);
        assert_eq!(t.best_x(), &[4.0]);
    }
}
