//! Experiment runner: sweep definitions, figure presets, result rows and
//! their CSV / JSON-lines encodings.

mod output;
mod run;
mod spec;

pub use output::{emit, parse_rows, plot_script, write_rows, Format, COLUMNS};
pub use run::{dbm_gain, run_experiment, run_experiment_with_threads, ResultRow};
pub use spec::{
    preset, ConfigFile, ExperimentSpec, GeometryFile, Scheme, Sweep, SweepFile, SweepPoint,
    SystemFile, PRESETS,
};

/// Version string stamped into every result row.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
