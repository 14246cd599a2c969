//! Declarative experiments: configs, record files, rate sweeps and synthetic data.
//!
//! An experiment writes into one output directory:
//!
//! * `records/{label}_seed{seed}.{csv,jsonl}`: one file per (solver, seed),
//! * `aggregate.csv`: seed mean and standard deviation keyed by `oracle_count`,
//! * `manifest.toml`: the resolved config; running it again reproduces the records.
//!
//! A rate sweep writes `rate_points.csv` and `rate_fit.json` instead.

mod config;
mod emit;
mod experiment;
mod output;
mod sweep;
mod synthetic;

pub use config::{
    BuiltProblem, ExperimentConfig, Grid, OutputFormat, PlantedLaw, Preset, ProblemSpec, SolverSpec,
    SweepMeasure, SweepSpec, SOLVER_KINDS,
};
pub use emit::{emit_records, format_float, parse_records_csv, write_records, RecordRow, RECORD_COLUMNS};
pub use experiment::{run_experiment, ExperimentSummary};
pub use sweep::{sweep_rate, SolverSweep, SweepPoint, SweepReport};
pub use synthetic::{emit_synthetic, parse_params};
