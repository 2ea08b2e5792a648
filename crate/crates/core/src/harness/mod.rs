//! Configuration, experiment orchestration and trace files.

pub mod config;
pub mod experiment;
pub mod trace_csv;

pub use config::{AlgConfig, AppConfig, Application, DualKind, EnvConfig, EnvKind, ExperimentConfig, PrimalKind};
pub use experiment::{
    aggregate_lines, baseline_lines, load_templates, parse_report, run_experiment, run_seeds, summarize,
    ExperimentOutcome, SeedMetrics, SeedRun, Summary,
};
pub use trace_csv::{
    format_sig, read_auction_csv, read_trace_csv, write_auction_csv, write_trace_csv, AuctionStream, TraceFile,
    TraceRow,
};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "MIXKNAP_OUTPUT_DIR";
