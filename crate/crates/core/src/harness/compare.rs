use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::convergence::{format_real, ConvergenceLog};
use crate::error::{Error, Result};
use crate::harness::stats::{wilcoxon_rank_sum, Summary, Verdict};

/// Final objective values of one arm, per problem, in run order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ArmResults {
    pub name: String,
    pub finals: BTreeMap<String, Vec<f64>>,
}

impl ArmResults {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            finals: BTreeMap::new(),
        }
    }

    /// Reads `<dir>/<problem>/run-*.csv`; the arm is named after `dir`.
    pub fn load(dir: &Path) -> Result<ArmResults> {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let mut results = ArmResults::new(name);
        for problem_dir in sorted_subdirs(dir)? {
            let problem = problem_dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let mut finals = Vec::new();
            for csv in run_csvs(&problem_dir)? {
                let log = ConvergenceLog::read(&csv)?;
                let last = log.last().ok_or_else(|| Error::Parse {
                    path: csv.clone(),
                    message: "convergence log has no records".into(),
                })?;
                finals.push(last.best);
            }
            if !finals.is_empty() {
                results.finals.insert(problem, finals);
            }
        }
        if results.finals.is_empty() {
            return Err(Error::invalid(format!(
                "no run CSVs under {}",
                dir.display()
            )));
        }
        Ok(results)
    }
}

pub(crate) fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_type().map_err(|e| Error::io(dir, e))?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// `run-*.csv` files of a problem directory in lexical order.
pub(crate) fn run_csvs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
        if let Some(name) = name {
            if name.starts_with("run-") && name.ends_with(".csv") {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub problem: String,
    pub first: Summary,
    pub second: Summary,
    pub statistic: f64,
    pub p_value: f64,
    /// From the first arm's point of view.
    pub verdict: Verdict,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub first: String,
    pub second: String,
    pub rows: Vec<ComparisonRow>,
}

/// Per-problem statistics of two arms with a rank-sum verdict for the first.
pub fn compare(first: &ArmResults, second: &ArmResults) -> Result<ComparisonReport> {
    let a: Vec<&String> = first.finals.keys().collect();
    let b: Vec<&String> = second.finals.keys().collect();
    if a != b {
        return Err(Error::invalid(format!(
            "problem sets differ: `{}` has {a:?}, `{}` has {b:?}",
            first.name, second.name
        )));
    }
    let mut rows = Vec::with_capacity(a.len());
    for (problem, xs) in &first.finals {
        let ys = &second.finals[problem];
        if xs.len() != ys.len() {
            return Err(Error::invalid(format!(
                "`{problem}`: {} runs for `{}` but {} for `{}`",
                xs.len(),
                first.name,
                ys.len(),
                second.name
            )));
        }
        rows.push(compare_samples(problem, xs, ys)?);
    }
    Ok(ComparisonReport {
        first: first.name.clone(),
        second: second.name.clone(),
        rows,
    })
}

pub(crate) fn compare_samples(problem: &str, xs: &[f64], ys: &[f64]) -> Result<ComparisonRow> {
    let first = Summary::of(xs)?;
    let second = Summary::of(ys)?;
    let test = wilcoxon_rank_sum(xs, ys)?;
    let (verdict, note) = if xs.len() < 2 || ys.len() < 2 {
        (Verdict::Similar, Some("insufficient runs".to_string()))
    } else {
        (Verdict::decide(test.p_value, first.median, second.median), None)
    };
    Ok(ComparisonRow {
        problem: problem.to_string(),
        first,
        second,
        statistic: test.statistic,
        p_value: test.p_value,
        verdict,
        note,
    })
}

pub const REPORT_CSV_HEADER: &str = "problem,arm_a,mean_a,std_a,median_a,arm_b,mean_b,std_b,median_b,statistic,p_value,verdict,note";

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.problem,
                self.first,
                format_real(r.first.mean),
                format_real(r.first.std),
                format_real(r.first.median),
                self.second,
                format_real(r.second.mean),
                format_real(r.second.std),
                format_real(r.second.median),
                format_real(r.statistic),
                format_real(r.p_value),
                r.verdict,
                r.note.as_deref().unwrap_or("")
            );
        }
        out
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let header = vec![
            "problem".to_string(),
            format!("{} mean±std", self.first),
            format!("{} median", self.first),
            format!("{} mean±std", self.second),
            format!("{} median", self.second),
            "p".to_string(),
            "verdict".to_string(),
        ];
        let mut table = vec![header];
        for r in &self.rows {
            let mut verdict = r.verdict.to_string();
            if let Some(note) = &r.note {
                verdict.push_str(&format!(" ({note})"));
            }
            table.push(vec![
                r.problem.clone(),
                format!("{:.4e}±{:.2e}", r.first.mean, r.first.std),
                format!("{:.4e}", r.first.median),
                format!("{:.4e}±{:.2e}", r.second.mean, r.second.std),
                format!("{:.4e}", r.second.median),
                format!("{:.3e}", r.p_value),
                verdict,
            ]);
        }
        let mut out = render_table(&table);
        let count = |v: Verdict| self.rows.iter().filter(|r| r.verdict == v).count();
        let _ = writeln!(
            out,
            "{} vs {}: {} better / {} worse / {} similar",
            self.first,
            self.second,
            count(Verdict::Better),
            count(Verdict::Worse),
            count(Verdict::Similar)
        );
        out
    }
}

pub(crate) fn render_table(rows: &[Vec<String>]) -> String {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..columns)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let pad = widths[c] - cell.chars().count();
                format!("{cell}{}", " ".repeat(pad))
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(name: &str, problem: &str, finals: Vec<f64>) -> ArmResults {
        let mut a = ArmResults::new(name);
        a.finals.insert(problem.into(), finals);
        a
    }

    #[test]
    fn identical_results_are_similar() {
        let xs: Vec<f64> = (0..25).map(|i| 1.0 + i as f64).collect();
        let report = compare(&arm("a", "p", xs.clone()), &arm("b", "p", xs)).unwrap();
        assert_eq!(report.rows[0].verdict, Verdict::Similar);
    }

    #[test]
    fn ten_times_smaller_wins() {
        let ys: Vec<f64> = (0..25).map(|i| 100.0 + 3.0 * i as f64).collect();
        let xs: Vec<f64> = ys.iter().map(|y| y / 10.0).collect();
        let report = compare(&arm("a", "p", xs), &arm("b", "p", ys)).unwrap();
        assert_eq!(report.rows[0].verdict, Verdict::Better);
        assert!(report.rows[0].p_value < 0.05);
    }

    #[test]
    fn single_run_is_insufficient() {
        let report = compare(&arm("a", "p", vec![1.0]), &arm("b", "p", vec![100.0])).unwrap();
        assert_eq!(report.rows[0].verdict, Verdict::Similar);
        assert_eq!(report.rows[0].note.as_deref(), Some("insufficient runs"));
        assert!(report.to_text().contains("insufficient runs"));
    }

    #[test]
    fn mismatched_problems_rejected() {
        assert!(compare(&arm("a", "p", vec![1.0]), &arm("b", "q", vec![1.0])).is_err());
        assert!(compare(&arm("a", "p", vec![1.0, 2.0]), &arm("b", "p", vec![1.0])).is_err());
    }

    #[test]
    fn csv_layout() {
        let report = compare(&arm("a", "p", vec![1.0, 2.0]), &arm("b", "p", vec![3.0, 4.0])).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(REPORT_CSV_HEADER));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!(fields[2], "1.5000000000000000e0");
    }
}
