use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::convergence::{format_real, ConvergenceLog};
use crate::error::{Error, Result};
use crate::harness::compare::{run_csvs, sorted_subdirs};

/// Run-averaged best-so-far curve of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedSeries {
    pub label: String,
    pub runs: usize,
    /// `(fe, mean best-so-far)` on the union of the runs' FE grids.
    pub points: Vec<(u64, f64)>,
}

/// Averages logs on the union of their FE grids with step interpolation.
pub fn average_logs(label: &str, logs: &[ConvergenceLog]) -> Result<AveragedSeries> {
    if logs.is_empty() || logs.iter().any(ConvergenceLog::is_empty) {
        return Err(Error::invalid(format!("series `{label}` has an empty log")));
    }
    let grid: BTreeSet<u64> = logs
        .iter()
        .flat_map(|l| l.records().iter().map(|r| r.fe))
        .collect();
    let points = grid
        .into_iter()
        .map(|fe| {
            let sum: f64 = logs.iter().filter_map(|l| l.value_at(fe)).sum();
            (fe, sum / logs.len() as f64)
        })
        .collect();
    Ok(AveragedSeries {
        label: label.to_string(),
        runs: logs.len(),
        points,
    })
}

#[derive(Debug, Clone)]
pub struct PlotOutput {
    pub svg: PathBuf,
    pub csv: PathBuf,
    /// Whether the y axis is `log10(1 + v)` because some mean was ≤ 0.
    pub symlog: bool,
    pub series: Vec<AveragedSeries>,
}

/// Plots one series per `(label, run CSVs)` group to an SVG at `out` and
/// writes the averaged series next to it as CSV (`arm,fe,mean_best`).
pub fn emit_plot(groups: &[(String, Vec<PathBuf>)], out: &Path, title: &str) -> Result<PlotOutput> {
    if groups.is_empty() || groups.iter().any(|(_, files)| files.is_empty()) {
        return Err(Error::invalid("plot needs at least one CSV per series"));
    }
    let mut series = Vec::with_capacity(groups.len());
    for (label, files) in groups {
        let logs: Vec<ConvergenceLog> = files
            .iter()
            .map(|f| ConvergenceLog::read(f))
            .collect::<Result<_>>()?;
        series.push(average_logs(label, &logs)?);
    }
    plot_series(&series, out, title)
}

/// Writes the SVG and averaged CSV for already averaged series.
pub fn plot_series(series: &[AveragedSeries], out: &Path, title: &str) -> Result<PlotOutput> {
    let symlog = series
        .iter()
        .flat_map(|s| s.points.iter())
        .any(|&(_, v)| v <= 0.0);
    if symlog {
        log::info!("{title}: some averaged objectives are <= 0, plotting log10(1 + v)");
    }
    let transform = |v: f64| {
        if symlog {
            v.signum() * v.abs().ln_1p() / std::f64::consts::LN_10
        } else {
            v.log10()
        }
    };

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let csv = out.with_extension("csv");
    let mut text = String::from("arm,fe,mean_best\n");
    for s in series {
        for &(fe, v) in &s.points {
            let _ = writeln!(text, "{},{fe},{}", s.label, format_real(v));
        }
    }
    std::fs::write(&csv, text).map_err(|e| Error::io(&csv, e))?;

    draw(series, out, title, symlog, transform).map_err(|e| Error::Plot(e.to_string()))?;
    Ok(PlotOutput {
        svg: out.to_path_buf(),
        csv,
        symlog,
        series: series.to_vec(),
    })
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * 0.03;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn draw(
    series: &[AveragedSeries],
    out: &Path,
    title: &str,
    symlog: bool,
    transform: impl Fn(f64) -> f64,
) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let curves: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().map(|&(fe, v)| (fe as f64, transform(v))).collect())
        .collect();
    let all = curves.iter().flatten();
    let (x0, x1) = all
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = all
        .filter(|p| p.1.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (y0, y1) = if y0.is_finite() { (y0, y1) } else { (0.0, 1.0) };
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);

    let root = SVGBackend::new(out, (900, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart
        .configure_mesh()
        .x_desc("fitness evaluations")
        .y_desc(if symlog {
            "log10(1 + mean best)"
        } else {
            "log10(mean best)"
        })
        .x_label_formatter(&|x| format!("{x:.0}"))
        .draw()?;
    for (i, (s, points)) in series.iter().zip(&curves).enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let label = format!("{} ({} runs)", s.label, s.runs);
        if points.len() == 1 {
            chart
                .draw_series(PointSeries::of_element(
                    points.clone(),
                    4,
                    color.filled(),
                    &|c, size, style| EmptyElement::at(c) + Circle::new((0, 0), size, style),
                ))?
                .label(label)
                .legend(move |(x, y)| Circle::new((x + 10, y), 4, color.filled()));
        } else {
            chart
                .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))?
                .label(label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

/// Plots an experiment directory laid out as `<dir>/<arm>/<problem>/run-*.csv`.
///
/// With several problems and no `problem` filter, writes one chart per
/// problem named `<out stem>-<problem>.svg`.
pub fn plot_dir(dir: &Path, out: &Path, problem: Option<&str>) -> Result<Vec<PlotOutput>> {
    let mut arms: Vec<(String, PathBuf)> = Vec::new();
    let mut problems = BTreeSet::new();
    for arm_dir in sorted_subdirs(dir)? {
        let mut has_runs = false;
        for problem_dir in sorted_subdirs(&arm_dir)? {
            if !run_csvs(&problem_dir)?.is_empty() {
                has_runs = true;
                problems.insert(file_name(&problem_dir));
            }
        }
        if has_runs {
            arms.push((file_name(&arm_dir), arm_dir));
        }
    }
    if arms.is_empty() {
        return Err(Error::invalid(format!(
            "no `<arm>/<problem>/run-*.csv` files under {}",
            dir.display()
        )));
    }
    let selected: Vec<String> = match problem {
        Some(p) if problems.contains(p) => vec![p.to_string()],
        Some(p) => {
            return Err(Error::invalid(format!(
                "problem `{p}` not found; available: {}",
                problems.into_iter().collect::<Vec<_>>().join(", ")
            )))
        }
        None => problems.into_iter().collect(),
    };
    let mut outputs = Vec::new();
    for p in &selected {
        let mut groups = Vec::new();
        for (name, arm_dir) in &arms {
            let problem_dir = arm_dir.join(p);
            if problem_dir.is_dir() {
                let files = run_csvs(&problem_dir)?;
                if !files.is_empty() {
                    groups.push((name.clone(), files));
                }
            }
        }
        let path = if selected.len() == 1 {
            out.to_path_buf()
        } else {
            let stem = out
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "plot".into());
            out.with_file_name(format!("{stem}-{p}.svg"))
        };
        outputs.push(emit_plot(&groups, &path, p)?);
    }
    Ok(outputs)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}
