use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bench::Problem;
use crate::convergence::format_real;
use crate::engine::{self, RunResult};
use crate::error::{Error, Result};
use crate::harness::compare::{compare_samples, render_table};
use crate::harness::spec::ExperimentSpec;
use crate::harness::stats::{Summary, Verdict};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_CSV_HEADER: &str =
    "problem,arm,runs,failed,mean,std,median,min,max,reference,statistic,p_value,verdict,note";

/// `<out_dir>/<arm>/<problem>/run-<i>.csv`
pub fn run_csv_path(out_dir: &Path, arm: &str, problem: &str, run: usize) -> PathBuf {
    out_dir.join(arm).join(problem).join(format!("run-{run:03}.csv"))
}

/// `<out_dir>/<arm>/<problem>/run-<i>.events.jsonl`
pub fn events_path(out_dir: &Path, arm: &str, problem: &str, run: usize) -> PathBuf {
    out_dir
        .join(arm)
        .join(problem)
        .join(format!("run-{run:03}.events.jsonl"))
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub problem: String,
    pub arm: String,
    pub run: usize,
    pub seed: u64,
    pub result: RunResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub problem: String,
    pub arm: String,
    pub run: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub problem: String,
    pub arm: String,
    pub failed: usize,
    /// `None` when every run failed.
    pub summary: Option<Summary>,
    /// First arm of the spec; absent on that arm's own rows.
    pub reference: Option<String>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// This arm against the reference.
    pub verdict: Option<Verdict>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Successful runs ordered by problem, arm and run index.
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub summary: Vec<SummaryRow>,
    pub out_dir: PathBuf,
}

impl ExperimentOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    /// Final objectives of one arm on one problem in run order.
    pub fn finals(&self, arm: &str, problem: &str) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.arm == arm && r.problem == problem)
            .map(|r| r.result.best_f)
            .collect()
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join(SUMMARY_FILE)
    }

    pub fn summary_text(&self) -> String {
        let mut table = vec![["problem", "arm", "runs", "mean", "std", "median", "p", "verdict"]
            .map(String::from)
            .to_vec()];
        for row in &self.summary {
            let stat = |f: fn(&Summary) -> f64| {
                row.summary
                    .as_ref()
                    .map(|s| format!("{:.4e}", f(s)))
                    .unwrap_or_else(|| "-".into())
            };
            let mut verdict = row.verdict.map(|v| v.to_string()).unwrap_or_default();
            if let Some(note) = &row.note {
                verdict.push_str(&format!(" ({note})"));
            }
            table.push(vec![
                row.problem.clone(),
                row.arm.clone(),
                row.summary.map(|s| s.count).unwrap_or(0).to_string(),
                stat(|s| s.mean),
                stat(|s| s.std),
                stat(|s| s.median),
                row.p_value.map(|p| format!("{p:.3e}")).unwrap_or_default(),
                verdict,
            ]);
        }
        let mut out = render_table(&table);
        for f in &self.failures {
            let _ = writeln!(
                out,
                "FAILED {} / {} run {} (seed {}): {}",
                f.arm, f.problem, f.run, f.seed, f.message
            );
        }
        out
    }
}

struct Task<'a> {
    problem: &'a Problem,
    problem_id: &'a str,
    arm: usize,
    run: usize,
    seed: u64,
}

/// Executes every run of the spec, writes per-run logs and `summary.csv`.
///
/// A failing run is recorded and the others continue; the returned outcome
/// lists the failures.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let problems: Vec<Problem> = spec
        .problems
        .iter()
        .map(|id| Problem::from_id(id))
        .collect::<Result<_>>()?;
    std::fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;

    let mut tasks = Vec::new();
    for (problem, id) in problems.iter().zip(&spec.problems) {
        for arm in 0..spec.arms.len() {
            for run in 0..spec.runs {
                tasks.push(Task {
                    problem,
                    problem_id: id,
                    arm,
                    run,
                    seed: spec.base_seed.wrapping_add(run as u64),
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<RunResult>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| execute(spec, task))
            .collect()
    });

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (task, outcome) in tasks.iter().zip(outcomes) {
        let arm = spec.arms[task.arm].name.clone();
        match outcome {
            Ok(result) => runs.push(RunRecord {
                problem: task.problem_id.to_string(),
                arm,
                run: task.run,
                seed: task.seed,
                result,
            }),
            Err(e) => {
                log::error!("{arm} on {} run {} failed: {e}", task.problem_id, task.run);
                failures.push(RunFailure {
                    problem: task.problem_id.to_string(),
                    arm,
                    run: task.run,
                    seed: task.seed,
                    message: e.to_string(),
                });
            }
        }
    }

    let mut outcome = ExperimentOutcome {
        runs,
        failures,
        summary: Vec::new(),
        out_dir: spec.out_dir.clone(),
    };
    outcome.summary = summarize(spec, &outcome)?;
    let path = outcome.summary_path();
    std::fs::write(&path, summary_csv(&outcome.summary)).map_err(|e| Error::io(&path, e))?;
    Ok(outcome)
}

fn execute(spec: &ExperimentSpec, task: &Task<'_>) -> Result<RunResult> {
    let arm = &spec.arms[task.arm];
    let config = arm.config_for(task.problem.dim());
    let result = engine::run(task.problem, &config, task.seed)?;
    let csv = run_csv_path(&spec.out_dir, &arm.name, task.problem_id, task.run);
    if let Some(dir) = csv.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&csv, result.log.to_csv()).map_err(|e| Error::io(&csv, e))?;
    let events = events_path(&spec.out_dir, &arm.name, task.problem_id, task.run);
    std::fs::write(&events, result.events_jsonl()).map_err(|e| Error::io(&events, e))?;
    log::info!(
        "{} on {} run {}: best {:e} after {} FEs",
        arm.name,
        task.problem_id,
        task.run,
        result.best_f,
        result.fe_used
    );
    Ok(result)
}

fn summarize(spec: &ExperimentSpec, outcome: &ExperimentOutcome) -> Result<Vec<SummaryRow>> {
    let reference = &spec.arms[0].name;
    let mut rows = Vec::new();
    for problem in &spec.problems {
        let reference_finals = outcome.finals(reference, problem);
        for arm in &spec.arms {
            let finals = outcome.finals(&arm.name, problem);
            let failed = outcome
                .failures
                .iter()
                .filter(|f| &f.arm == &arm.name && &f.problem == problem)
                .count();
            let summary = if finals.is_empty() {
                None
            } else {
                Some(Summary::of(&finals)?)
            };
            let mut row = SummaryRow {
                problem: problem.clone(),
                arm: arm.name.clone(),
                failed,
                summary,
                reference: None,
                statistic: None,
                p_value: None,
                verdict: None,
                note: None,
            };
            if &arm.name != reference {
                row.reference = Some(reference.clone());
                if finals.is_empty() || reference_finals.is_empty() {
                    row.note = Some("no successful runs".into());
                } else {
                    let cmp = compare_samples(problem, &finals, &reference_finals)?;
                    row.statistic = Some(cmp.statistic);
                    row.p_value = Some(cmp.p_value);
                    row.verdict = Some(cmp.verdict);
                    row.note = cmp.note;
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    let real = |v: Option<f64>| v.map(format_real).unwrap_or_default();
    for r in rows {
        let s = r.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.problem,
            r.arm,
            s.map(|s| s.count).unwrap_or(0),
            r.failed,
            real(s.map(|s| s.mean)),
            real(s.map(|s| s.std)),
            real(s.map(|s| s.median)),
            real(s.map(|s| s.min)),
            real(s.map(|s| s.max)),
            r.reference.as_deref().unwrap_or(""),
            real(r.statistic),
            real(r.p_value),
            r.verdict.map(|v| v.symbol()).unwrap_or(""),
            r.note.as_deref().unwrap_or("")
        );
    }
    out
}
