use std::path::{Path, PathBuf};

use mses::convergence::{format_real, ConvergenceLog};
use mses::harness::experiment::{run_csv_path, summary_csv, SUMMARY_FILE};
use mses::harness::stats::Summary;
use mses::harness::sweep::normalize;
use mses::harness::{
    compare, emit_plot, parse_spec, run_experiment, sweep, wilcoxon_rank_sum, ArmResults,
    ExperimentSpec, Scaled, SweepParam, SweepRow, Verdict,
};
use proptest::prelude::*;
use statrs::function::erf::erfc;

/// Brute-force null distribution: rank sums of every `n`-subset of `1..=total`.
fn enumerate_rank_sums(total: usize, n: usize) -> Vec<u32> {
    (0u32..1 << total)
        .filter(|mask| mask.count_ones() as usize == n)
        .map(|mask| (0..total).filter(|i| mask >> i & 1 == 1).map(|i| i as u32 + 1).sum())
        .collect()
}

#[test]
fn exact_branch_matches_enumeration_for_all_small_samples() {
    let mut checked = 0;
    for total in 2..=12usize {
        for n in 1..total {
            let sums = enumerate_rank_sums(total, n);
            let count = sums.len() as f64;
            for mask in (0u32..1 << total).filter(|m| m.count_ones() as usize == n) {
                // distinct values in a non-trivial order-preserving encoding of the ranks
                let value = |i: usize| (i as f64 / 3.0).exp() - 0.5;
                let a: Vec<f64> = (0..total).filter(|i| mask >> i & 1 == 1).map(value).collect();
                let b: Vec<f64> = (0..total).filter(|i| mask >> i & 1 == 0).map(value).collect();
                let w: u32 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| i as u32 + 1).sum();
                let lower = sums.iter().filter(|&&s| s <= w).count() as f64 / count;
                let upper = sums.iter().filter(|&&s| s >= w).count() as f64 / count;
                let expected = (2.0 * lower.min(upper)).min(1.0);
                let test = wilcoxon_rank_sum(&a, &b).unwrap();
                assert!(test.exact);
                assert_eq!(test.statistic, f64::from(w));
                assert!(
                    (test.p_value - expected).abs() <= 1e-14,
                    "n={n} m={} w={w}: {} vs {expected}",
                    total - n,
                    test.p_value
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, (2..=12).map(|t: u32| 2u32.pow(t) - 2).sum::<u32>());
}

#[test]
fn worked_example_and_separated_samples() {
    let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert_eq!((t.statistic, t.p_value), (6.0, 0.1));
    let a: Vec<f64> = (1..=10).map(f64::from).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 100.0).collect();
    let t = wilcoxon_rank_sum(&a, &b).unwrap();
    let oracle = enumerate_rank_sums(20, 10);
    let tail = oracle.iter().filter(|&&s| s <= 55).count() as f64 / oracle.len() as f64;
    assert_eq!(t.p_value, 2.0 * tail);
    assert!(t.p_value < 0.001);
}

fn arm(name: &str, finals: &[(&str, Vec<f64>)]) -> ArmResults {
    let mut a = ArmResults::new(name);
    for (p, v) in finals {
        a.finals.insert(p.to_string(), v.clone());
    }
    a
}

#[test]
fn ten_times_smaller_is_significantly_better() {
    let ys: Vec<f64> = (0..25).map(|i| 100.0 + 3.0 * f64::from(i)).collect();
    let xs: Vec<f64> = ys.iter().map(|y| y / 10.0).collect();
    let report = compare(&arm("a", &[("p", xs)]), &arm("b", &[("p", ys)])).unwrap();
    let row = &report.rows[0];
    // every a below every b: W = 1 + … + 25, normal approximation with continuity correction
    let (n, m) = (25.0, 25.0);
    let mean = n * (n + m + 1.0) / 2.0;
    let sd = (n * m * (n + m + 1.0) / 12.0f64).sqrt();
    let z = ((325.0f64 - mean).abs() - 0.5) / sd;
    let p = erfc(z / std::f64::consts::SQRT_2);
    assert_eq!(row.statistic, 325.0);
    assert!((row.p_value - p).abs() <= 1e-15 + 1e-12 * p);
    assert_eq!(row.verdict, Verdict::Better);
}

#[test]
fn identical_sets_are_similar_everywhere() {
    let finals = [("p", vec![3.0, 1.0, 2.0, 5.0]), ("q", vec![0.5, 0.5, 0.7, 0.1])];
    let report = compare(&arm("a", &finals), &arm("b", &finals)).unwrap();
    assert!(report.rows.iter().all(|r| r.verdict == Verdict::Similar));
}

fn small_spec(out: &Path, runs: usize) -> ExperimentSpec {
    let text = format!(
        r#"
problems = ["partial-rastrigin-d10-s1"]
runs = {runs}
NP = 12
max_FEs = 1500
workers = 3
out_dir = "{}"

[[arm]]
name = "mses"

[[arm]]
name = "single"
mode = "single"
"#,
        out.display()
    );
    parse_spec(&text, Path::new("inline.toml")).unwrap()
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                found.push(p);
            }
        }
    }
    found.sort();
    found
}

#[test]
fn experiment_writes_one_csv_per_run_and_replays_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = small_spec(&tmp.path().join("a"), 3);
    let outcome = run_experiment(&spec).unwrap();
    assert!(outcome.succeeded());
    assert_eq!(outcome.runs.len(), 6);
    let files = files_under(&tmp.path().join("a"));
    let csvs: Vec<_> = files.iter().filter(|f| f.extension().unwrap() == "csv").collect();
    assert_eq!(csvs.len(), 7);
    let events = files.iter().filter(|f| f.to_string_lossy().ends_with(".events.jsonl")).count();
    assert_eq!(events, 6);
    for r in &outcome.runs {
        assert_eq!(r.seed, r.run as u64);
        let path = run_csv_path(&spec.out_dir, &r.arm, &r.problem, r.run);
        assert_eq!(std::fs::read_to_string(path).unwrap(), r.result.log.to_csv());
    }

    let mut again = small_spec(&tmp.path().join("b"), 3);
    again.workers = 1;
    run_experiment(&again).unwrap();
    for f in &files {
        let rel = f.strip_prefix(tmp.path().join("a")).unwrap();
        assert_eq!(std::fs::read(f).unwrap(), std::fs::read(tmp.path().join("b").join(rel)).unwrap());
    }
}

#[test]
fn summary_recomputes_from_raw_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = small_spec(tmp.path(), 4);
    let outcome = run_experiment(&spec).unwrap();
    let summary = std::fs::read_to_string(tmp.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary, summary_csv(&outcome.summary));

    let mses = ArmResults::load(&tmp.path().join("mses")).unwrap();
    let single = ArmResults::load(&tmp.path().join("single")).unwrap();
    let lines: Vec<&str> = summary.lines().skip(1).collect();
    for (line, arm) in lines.iter().zip([&mses, &single]) {
        let fields: Vec<&str> = line.split(',').collect();
        let finals = &arm.finals["partial-rastrigin-d10-s1"];
        let n = finals.len() as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let std = (finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        let mut sorted = finals.clone();
        sorted.sort_by(f64::total_cmp);
        let median = (sorted[1] + sorted[2]) / 2.0;
        assert_eq!(fields[1], arm.name);
        assert_eq!(fields[2], "4");
        assert_eq!(fields[4], format_real(mean));
        assert_eq!(fields[5], format_real(std));
        assert_eq!(fields[6], format_real(median));
        assert_eq!(fields[7], format_real(sorted[0]));
        assert_eq!(fields[8], format_real(sorted[3]));
    }
    let report = compare(&single, &mses).unwrap();
    let single_row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(single_row[11], format_real(report.rows[0].p_value));
    assert_eq!(single_row[12], report.rows[0].verdict.symbol());
}

#[test]
fn failing_runs_are_recorded_and_others_continue() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = small_spec(tmp.path(), 2);
    // a file where the arm directory should go makes every write of that arm fail
    std::fs::write(tmp.path().join("single"), "blocked").unwrap();
    let outcome = run_experiment(&spec).unwrap();
    assert!(!outcome.succeeded());
    assert_eq!(outcome.failures.len(), 2);
    assert!(outcome.failures.iter().all(|f| f.arm == "single"));
    assert_eq!(outcome.runs.len(), 2);
    let summary = std::fs::read_to_string(tmp.path().join(SUMMARY_FILE)).unwrap();
    assert!(summary.contains("single,0,2,"));
    assert!(summary.contains("no successful runs"));
}

#[test]
fn single_arm_transfer_settings_are_ignored_with_warning() {
    let text = r#"
problems = ["partial-rastrigin-d10-s1"]
[[arm]]
name = "base"
mode = "single"
Q = 3
G_r = 5
"#;
    let spec = parse_spec(text, Path::new("w.toml")).unwrap();
    assert_eq!(spec.warnings.len(), 1);
    assert!(spec.warnings[0].contains("Q") && spec.warnings[0].contains("G_r"));
    assert!(!spec.arms[0].config_for(10).multi_space);
}

#[test]
fn q_sweep_runs_one_block_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = small_spec(tmp.path(), 2);
    let values = [Scaled::OfPopulation(0.1), Scaled::OfPopulation(0.2), Scaled::OfPopulation(0.4)];
    let outcome = sweep(&spec, SweepParam::TransferCount, &values).unwrap();
    for label in ["Q=0.1np", "Q=0.2np", "Q=0.4np", "baseline"] {
        assert!(tmp.path().join(label).join(SUMMARY_FILE).is_file(), "{label}");
    }
    let resolved: Vec<Option<usize>> = outcome.rows.iter().map(|r| r.resolved).collect();
    assert_eq!(resolved, vec![Some(2), Some(3), Some(5), None]);
    let worst = outcome.rows.iter().filter_map(|r| r.normalized).fold(0.0, f64::max);
    assert_eq!(worst, 1.0);
    assert!(outcome.rows.iter().all(|r| (0.0..=1.0).contains(&r.normalized.unwrap())));
}

#[test]
fn ds_sweep_has_one_row_per_value_and_rejects_bad_values_early() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = small_spec(tmp.path(), 2);
    spec.arms.truncate(1);
    let values = [Scaled::OfDim(0.2), Scaled::OfDim(0.6), Scaled::OfDim(0.9)];
    let outcome = sweep(&spec, SweepParam::SimplifiedDim, &values).unwrap();
    assert_eq!(outcome.rows.len(), 3);
    let table = std::fs::read_to_string(&outcome.table_path).unwrap();
    assert_eq!(table.lines().count(), 4);

    let fresh = tempfile::tempdir().unwrap();
    let mut bad = small_spec(&fresh.path().join("never"), 2);
    bad.arms.truncate(1);
    let err = sweep(&bad, SweepParam::SimplifiedDim, &[Scaled::Absolute(3), Scaled::Absolute(10)]);
    assert!(err.is_err());
    assert!(!fresh.path().join("never").exists());
    let err = sweep(&bad, SweepParam::TransferInterval, &[Scaled::OfPopulation(0.5)]);
    assert!(err.is_err());
}

fn rows_from(means: &[f64]) -> Vec<SweepRow> {
    means
        .iter()
        .enumerate()
        .map(|(i, m)| SweepRow {
            value: i.to_string(),
            resolved: Some(i),
            problem: "p".into(),
            arm: "a".into(),
            summary: Summary::of(&[*m]).ok(),
            normalized: None,
        })
        .collect()
}

proptest! {
    #[test]
    fn sweep_normalization_is_scale_invariant(
        means in prop::collection::vec(1e-6f64..1e6, 1..8),
        scale in 1e-3f64..1e3,
    ) {
        let mut base = rows_from(&means);
        let scaled_means: Vec<f64> = means.iter().map(|m| m * scale).collect();
        let mut scaled = rows_from(&scaled_means);
        normalize(&mut base);
        normalize(&mut scaled);
        let max = base.iter().map(|r| r.normalized.unwrap()).fold(0.0, f64::max);
        prop_assert_eq!(max, 1.0);
        for (a, b) in base.iter().zip(&scaled) {
            let (a, b) = (a.normalized.unwrap(), b.normalized.unwrap());
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.max(b));
        }
    }
}

fn write_log(path: &Path, records: &[(u64, f64)]) -> PathBuf {
    let mut log = ConvergenceLog::new();
    for &(fe, v) in records {
        log.push(fe, v).unwrap();
    }
    std::fs::write(path, log.to_csv()).unwrap();
    path.to_path_buf()
}

#[test]
fn plot_averages_each_arm_on_its_fe_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let a = vec![
        write_log(&d.join("a0.csv"), &[(1, 8.0), (10, 2.0)]),
        write_log(&d.join("a1.csv"), &[(1, 4.0), (5, 1.0)]),
        write_log(&d.join("a2.csv"), &[(2, 6.0), (10, 0.5)]),
    ];
    let b = vec![
        write_log(&d.join("b0.csv"), &[(1, 100.0)]),
        write_log(&d.join("b1.csv"), &[(1, 10.0), (3, 1.0)]),
        write_log(&d.join("b2.csv"), &[(1, 1.0)]),
    ];
    let out = emit_plot(&[("a".into(), a), ("b".into(), b)], &d.join("fig.svg"), "demo").unwrap();
    assert_eq!(out.series.len(), 2);
    assert!(out.series.iter().all(|s| s.runs == 3));
    // fe 5: run 0 holds 8, run 1 improved to 1, run 2 holds 6
    let at = |s: usize, fe: u64| out.series[s].points.iter().find(|p| p.0 == fe).unwrap().1;
    assert_eq!(at(0, 5), (8.0 + 1.0 + 6.0) / 3.0);
    assert_eq!(at(0, 10), (2.0 + 1.0 + 0.5) / 3.0);
    assert_eq!(at(1, 3), (100.0 + 1.0 + 1.0) / 3.0);
    assert!(!out.symlog);
    assert!(std::fs::read_to_string(&out.svg).unwrap().contains("<svg"));
    let csv = std::fs::read_to_string(&out.csv).unwrap();
    assert!(csv.starts_with("arm,fe,mean_best\na,1,"));
}

#[test]
fn plot_of_single_point_log_does_not_crash() {
    let tmp = tempfile::tempdir().unwrap();
    let f = write_log(&tmp.path().join("one.csv"), &[(50, 0.0)]);
    let out = emit_plot(&[("solo".into(), vec![f])], &tmp.path().join("one.svg"), "one").unwrap();
    assert!(out.symlog);
    assert_eq!(out.series[0].points, vec![(50, 0.0)]);
}
