//! Experiment runner: JSON configs, sigma sweeps, CSV/JSON/SVG reports.

pub mod error;
pub mod experiment;
pub mod report;
pub mod svg;

pub use error::{CliError, CliResult};
pub use experiment::{
    compare_configs, run_experiment, write_comparison_csv, ExperimentConfig, InputSource,
    SummaryRow,
};
pub use report::{write_frame_csv, FRAME_COLUMNS};
pub use svg::emit_profile_svg;
