//! Experiment specs, parallel execution and result files.

mod emit;
mod run;
mod spec;

pub use emit::{
    emit_all, emit_csv, emit_summary, run_csv, summarize, summary_csv, SeedOutcome, TrainerSummary, RUN_CSV_HEADER,
    SUMMARY_CSV_HEADER,
};
pub use run::{run_experiment, RunResult};
pub use spec::{
    parse_spec, parse_spec_str, serialize_spec, DatasetSpec, EmitFlags, ExperimentSpec, Generator, Grid, Overrides,
};
