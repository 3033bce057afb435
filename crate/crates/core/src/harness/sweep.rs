use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::bench::ProblemSpec;
use crate::convergence::format_real;
use crate::error::{Error, Result};
use crate::harness::compare::render_table;
use crate::harness::experiment::{run_experiment, ExperimentOutcome};
use crate::harness::spec::{ExperimentSpec, Mode, Overrides, Scaled};
use crate::harness::stats::Summary;

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    /// `A_size`
    ArchiveSize,
    /// `d_s`
    SimplifiedDim,
    /// `G_r`
    ReconstructionInterval,
    /// `G_t`
    TransferInterval,
    /// `Q`
    TransferCount,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::ArchiveSize,
        SweepParam::SimplifiedDim,
        SweepParam::ReconstructionInterval,
        SweepParam::TransferInterval,
        SweepParam::TransferCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::ArchiveSize => "A_size",
            SweepParam::SimplifiedDim => "d_s",
            SweepParam::ReconstructionInterval => "G_r",
            SweepParam::TransferInterval => "G_t",
            SweepParam::TransferCount => "Q",
        }
    }

    fn apply(self, overrides: &Overrides, value: Scaled) -> Overrides {
        let mut o = *overrides;
        match self {
            SweepParam::ArchiveSize => o.archive_capacity = Some(value),
            SweepParam::SimplifiedDim => o.simplified_dim = Some(value),
            SweepParam::TransferCount => o.to_original = Some(value),
            SweepParam::ReconstructionInterval | SweepParam::TransferInterval => {
                let Scaled::Absolute(n) = value else {
                    unreachable!("interval values are checked to be absolute")
                };
                if self == SweepParam::ReconstructionInterval {
                    o.reconstruction_interval = Some(n as u64);
                } else {
                    o.transfer_interval = Some(n as u64);
                }
            }
        }
        o
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = SweepParam::ALL.iter().map(|p| p.name()).collect();
                Error::invalid(format!(
                    "unknown sweep parameter `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a comma-separated list such as `20,60,90` or `0.1np,0.2np`.
pub fn parse_values(list: &str) -> Result<Vec<Scaled>> {
    let values: Vec<Scaled> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::invalid("no sweep values given"));
    }
    Ok(values)
}

/// Label of the block holding single-mode arms, which do not depend on the
/// swept parameter and run once.
pub const BASELINE_LABEL: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// The swept value as given, or [`BASELINE_LABEL`].
    pub value: String,
    /// The value resolved for this problem; `None` for the baseline.
    pub resolved: Option<usize>,
    pub problem: String,
    pub arm: String,
    /// `None` when every run failed.
    pub summary: Option<Summary>,
    /// Mean final objective over the worst mean on this problem.
    pub normalized: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    pub table_path: PathBuf,
    pub normalized_path: PathBuf,
    pub failures: usize,
}

impl SweepOutcome {
    pub fn to_text(&self) -> String {
        let mut table = vec![vec![
            self.param.to_string(),
            "problem".into(),
            "arm".into(),
            "mean".into(),
            "median".into(),
            "normalized".into(),
        ]];
        for r in &self.rows {
            let value = match r.resolved {
                Some(n) if r.value != n.to_string() => format!("{} ({n})", r.value),
                _ => r.value.clone(),
            };
            table.push(vec![
                value,
                r.problem.clone(),
                r.arm.clone(),
                r.summary.map(|s| format!("{:.4e}", s.mean)).unwrap_or("-".into()),
                r.summary.map(|s| format!("{:.4e}", s.median)).unwrap_or("-".into()),
                r.normalized.map(|v| format!("{v:.4}")).unwrap_or("-".into()),
            ]);
        }
        render_table(&table)
    }
}

/// Runs one experiment block per value of `param` on the spec's `mses` arms,
/// plus one block for its `single` arms, then normalizes each problem's mean
/// objectives by the worst one.
///
/// Every value is checked against every arm and problem before any run.
/// Results go to `<out_dir>/<param>=<value>/` and `<out_dir>/baseline/`.
pub fn sweep(spec: &ExperimentSpec, param: SweepParam, values: &[Scaled]) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::invalid("no sweep values given"));
    }
    spec.validate()?;
    let mses_arms: Vec<_> = spec.arms.iter().filter(|a| a.mode == Mode::Mses).collect();
    if mses_arms.is_empty() {
        return Err(Error::invalid(format!(
            "sweeping {param} needs at least one `mses` arm"
        )));
    }
    let dims: Vec<(String, usize)> = spec
        .problems
        .iter()
        .map(|id| ProblemSpec::parse(id).map(|p| (id.clone(), p.dim)))
        .collect::<Result<_>>()?;
    let mut labels = Vec::with_capacity(values.len());
    for &value in values {
        let label = value.to_string();
        if labels.contains(&label) {
            return Err(Error::invalid(format!("sweep value {label} given twice")));
        }
        let interval = matches!(
            param,
            SweepParam::ReconstructionInterval | SweepParam::TransferInterval
        );
        if interval && !matches!(value, Scaled::Absolute(_)) {
            return Err(Error::invalid(format!("{param} takes integer values, got {label}")));
        }
        for arm in &mses_arms {
            let overrides = param.apply(&arm.overrides, value);
            for (id, dim) in &dims {
                overrides
                    .config_for(*dim, Mode::Mses)
                    .validate(*dim)
                    .map_err(|e| {
                        Error::invalid(format!(
                            "{param} = {label} is invalid for arm `{}` on `{id}`: {e}",
                            arm.name
                        ))
                    })?;
            }
        }
        labels.push(label);
    }

    let mut rows = Vec::new();
    let mut failures = 0;
    for (&value, label) in values.iter().zip(&labels) {
        let mut block = spec.clone();
        block.out_dir = spec.out_dir.join(format!("{param}={label}"));
        block.warnings.clear();
        block.arms = mses_arms
            .iter()
            .map(|arm| {
                let mut arm = (*arm).clone();
                arm.overrides = param.apply(&arm.overrides, value);
                arm
            })
            .collect();
        let outcome = run_experiment(&block)?;
        failures += outcome.failures.len();
        push_rows(&mut rows, &block, &outcome, label, |arm, dim| {
            let config = arm.config_for(dim);
            Some(match param {
                SweepParam::ArchiveSize => config.archive_capacity,
                SweepParam::SimplifiedDim => config.simplified_dim,
                SweepParam::ReconstructionInterval => config.reconstruction_interval as usize,
                SweepParam::TransferInterval => config.transfer_interval as usize,
                SweepParam::TransferCount => config.to_original,
            })
        });
    }
    if spec.arms.iter().any(|a| a.mode == Mode::Single) {
        let mut block = spec.clone();
        block.out_dir = spec.out_dir.join(BASELINE_LABEL);
        block.warnings.clear();
        block.arms.retain(|a| a.mode == Mode::Single);
        let outcome = run_experiment(&block)?;
        failures += outcome.failures.len();
        push_rows(&mut rows, &block, &outcome, BASELINE_LABEL, |_, _| None);
    }
    normalize(&mut rows);

    std::fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    let table_path = spec.out_dir.join(format!("sweep-{param}.csv"));
    let normalized_path = spec.out_dir.join(format!("sweep-{param}-normalized.csv"));
    std::fs::write(&table_path, table_csv(param, &rows)).map_err(|e| Error::io(&table_path, e))?;
    std::fs::write(&normalized_path, normalized_csv(param, &rows))
        .map_err(|e| Error::io(&normalized_path, e))?;
    Ok(SweepOutcome {
        param,
        rows,
        table_path,
        normalized_path,
        failures,
    })
}

fn push_rows(
    rows: &mut Vec<SweepRow>,
    block: &ExperimentSpec,
    outcome: &ExperimentOutcome,
    label: &str,
    resolve: impl Fn(&crate::harness::spec::ArmSpec, usize) -> Option<usize>,
) {
    for id in &block.problems {
        let dim = ProblemSpec::parse(id).map(|p| p.dim).unwrap_or(0);
        for arm in &block.arms {
            let finals = outcome.finals(&arm.name, id);
            rows.push(SweepRow {
                value: label.to_string(),
                resolved: resolve(arm, dim),
                problem: id.clone(),
                arm: arm.name.clone(),
                summary: Summary::of(&finals).ok(),
                normalized: None,
            });
        }
    }
}

/// Divides each problem's mean objectives by the largest one, so the worst
/// configuration reads exactly 1 and values near 0 are best.
pub fn normalize(rows: &mut [SweepRow]) {
    let problems: Vec<String> = rows.iter().map(|r| r.problem.clone()).collect();
    for problem in problems {
        let worst = rows
            .iter()
            .filter(|r| r.problem == problem)
            .filter_map(|r| r.summary.map(|s| s.mean))
            .fold(f64::NEG_INFINITY, f64::max);
        for r in rows.iter_mut().filter(|r| r.problem == problem) {
            r.normalized = r.summary.map(|s| {
                if s.mean == worst {
                    1.0
                } else {
                    s.mean / worst
                }
            });
        }
    }
}

fn table_csv(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut out = format!("{param},resolved,problem,arm,runs,mean,std,median\n");
    for r in rows {
        let real = |f: fn(&Summary) -> f64| r.summary.as_ref().map(|s| format_real(f(s))).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.value,
            r.resolved.map(|n| n.to_string()).unwrap_or_default(),
            r.problem,
            r.arm,
            r.summary.map(|s| s.count).unwrap_or(0),
            real(|s| s.mean),
            real(|s| s.std),
            real(|s| s.median)
        );
    }
    out
}

fn normalized_csv(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut out = format!("problem,{param},arm,normalized\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.problem,
            r.value,
            r.arm,
            r.normalized.map(format_real).unwrap_or_default()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: &str, problem: &str, mean: f64) -> SweepRow {
        SweepRow {
            value: value.into(),
            resolved: None,
            problem: problem.into(),
            arm: "a".into(),
            summary: Summary::of(&[mean]).ok(),
            normalized: None,
        }
    }

    #[test]
    fn worst_is_one() {
        let mut rows = vec![row("1", "p", 3.0), row("2", "p", 12.0), row("1", "q", 0.5), row("2", "q", 0.25)];
        normalize(&mut rows);
        let n: Vec<f64> = rows.iter().map(|r| r.normalized.unwrap()).collect();
        assert_eq!(n, vec![0.25, 1.0, 1.0, 0.5]);
    }

    #[test]
    fn param_names() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!("NP".parse::<SweepParam>().is_err());
    }

    #[test]
    fn value_lists() {
        let v = parse_values("0.1np, 0.2np,0.4np").unwrap();
        assert_eq!(v.len(), 3);
        assert!(parse_values("").is_err());
        assert!(parse_values("1,x").is_err());
    }
}
