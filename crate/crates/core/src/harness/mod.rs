//! Experiment configuration, presets, sweeps, CSV output and the
//! acceptance checks.

use std::path::PathBuf;

use crate::kernels::KernelError;
use crate::metrics::MetricError;
use crate::potentials::PotentialError;
use crate::theory::TheoryError;

mod bounds;
pub mod checks;
mod config;
mod experiment;
mod output;
mod presets;
mod reference;

pub use bounds::{bounds_table, format_bounds_table, BoundsRow, CURVE_STEPS};
pub use config::{parse_config, to_toml, ConfigError, ExperimentSpec, Preset, Scale};
pub use experiment::{
    exact_value, horizon_steps, run_experiment, sweep, target_label, RunRecord, Row, RunStatus,
    HORIZON, SCHEMA_VERSION,
};
pub use output::{append_csv, emit_csv, read_csv, write_saturation_tsv, CSV_COLUMNS};
pub use presets::preset_spec;
pub use reference::{cache_dir, reference_moment, ReferenceSettings, CACHE_ENV};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "RCD_LMC_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: unexpected header `{found}`")]
    Header { path: PathBuf, found: String },
    #[error("{path}: schema version {found}, expected {expected}")]
    SchemaMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("reference cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error("invalid {WORKERS_ENV}: {0}")]
    Workers(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Worker count from [`WORKERS_ENV`]; `None` when unset.
pub fn workers_from_env() -> Result<Option<usize>, HarnessError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(HarnessError::Workers(format!("expected a positive integer, got `{s}`"))),
        },
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool (all
/// available cores) when `None`.
pub fn with_workers<R: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R, HarnessError> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Workers(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
