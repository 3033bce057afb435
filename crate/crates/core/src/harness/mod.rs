//! Experiment specs, batch execution, statistics, sweeps and plots.

pub mod compare;
pub mod experiment;
pub mod plot;
pub mod spec;
pub mod stats;
pub mod sweep;

pub use compare::{compare, ArmResults, ComparisonReport, ComparisonRow};
pub use experiment::{run_experiment, ExperimentOutcome, RunFailure, RunRecord, SummaryRow};
pub use plot::{average_logs, emit_plot, plot_dir, AveragedSeries, PlotOutput};
pub use spec::{load_spec, parse_spec, ArmSpec, ExperimentSpec, Mode, Overrides, Scaled};
pub use stats::{wilcoxon_rank_sum, RankSumTest, Summary, Verdict};
pub use sweep::{parse_values, sweep, SweepOutcome, SweepParam, SweepRow};
