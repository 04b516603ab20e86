//! Config-driven experiments: single runs, grids, trace files and plots.

mod config;
mod grid;
mod plot;
mod run;
mod trace;

pub use config::{
    AnyProblem, ExperimentConfig, GradientMode, LrScheduleKind, OptimizerKind, PolicyKind,
    ProblemKind, SwitchKind,
};
pub use grid::{
    grid_cells, run_grid, trace_paths, write_summary, Cell, CellSummary, GridResult, GridSpec,
    DEFAULT_LEARNING_RATES, DEFAULT_MOMENTA, SUMMARY_HEADER,
};
pub use plot::{build_charts, cv_scatter, emit_plots, epoch_positions, Chart, Mark, PlotOutput, Series};
pub use run::{run_experiment, RunOutput, RunSummary};
pub use trace::{read_trace, trace_to_bytes, write_trace, write_trace_to, TraceRecord, TRACE_HEADER};
