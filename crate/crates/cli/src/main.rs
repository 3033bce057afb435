use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mses::harness::{self, ArmResults, ExperimentSpec, SweepParam};

#[derive(Parser)]
#[command(name = "mses", version, about = "Multi-space evolutionary search experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides the spec's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the spec's output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every arm of a spec and write logs plus summary.csv.
    Run { spec: PathBuf },
    /// Compare two arm directories (`<arm>/<problem>/run-*.csv`).
    Compare {
        first: PathBuf,
        second: PathBuf,
        /// Also write the report as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a spec for each value of one parameter.
    Sweep {
        spec: PathBuf,
        /// One of A_size, d_s, G_r, G_t, Q.
        #[arg(long)]
        param: String,
        /// Comma-separated values; counts or `<f>np` / `<f>dim`.
        #[arg(long)]
        values: String,
    },
    /// Plot run-averaged convergence curves of an experiment directory.
    Plot {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only this problem id.
        #[arg(long)]
        problem: Option<String>,
    },
}

fn load(path: &Path, common: &Common) -> Result<ExperimentSpec> {
    let mut spec = harness::load_spec(path)?;
    if let Some(seed) = common.seed {
        spec.base_seed = seed;
    }
    if let Some(workers) = common.workers {
        spec.workers = workers;
    }
    if let Some(dir) = &common.out_dir {
        spec.out_dir = dir.clone();
    }
    Ok(spec)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match &cli.command {
        Command::Run { spec } => {
            let spec = load(spec, &cli.common)?;
            let outcome = harness::run_experiment(&spec)?;
            print!("{}", outcome.summary_text());
            println!("summary written to {}", outcome.summary_path().display());
            if !outcome.succeeded() {
                bail!("{} run(s) failed", outcome.failures.len());
            }
        }
        Command::Compare { first, second, out } => {
            let a = ArmResults::load(first)?;
            let b = ArmResults::load(second)?;
            let report = harness::compare(&a, &b)?;
            print!("{}", report.to_text());
            let out = out
                .clone()
                .or_else(|| cli.common.out_dir.as_ref().map(|d| d.join("compare.csv")));
            if let Some(path) = out {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                }
                std::fs::write(&path, report.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("report written to {}", path.display());
            }
        }
        Command::Sweep {
            spec,
            param,
            values,
        } => {
            let param: SweepParam = param.parse()?;
            let values = harness::parse_values(values)?;
            let spec = load(spec, &cli.common)?;
            let outcome = harness::sweep(&spec, param, &values)?;
            print!("{}", outcome.to_text());
            println!(
                "tables written to {} and {}",
                outcome.table_path.display(),
                outcome.normalized_path.display()
            );
            if outcome.failures > 0 {
                bail!("{} run(s) failed", outcome.failures);
            }
        }
        Command::Plot { dir, out, problem } => {
            for output in harness::plot_dir(dir, out, problem.as_deref())? {
                if output.symlog {
                    eprintln!(
                        "note: {} has non-positive objectives, y axis is log10(1 + v)",
                        output.svg.display()
                    );
                }
                println!(
                    "wrote {} and {}",
                    output.svg.display(),
                    output.csv.display()
                );
            }
        }
    }
    Ok(())
}
