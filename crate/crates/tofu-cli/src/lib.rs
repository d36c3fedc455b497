//! Implementation of the `tofu` command line tool: dataset synthesis,
//! classical depth reconstruction, fusion network training, evaluation
//! and single-frame inference.
//!
//! Every command is a pure function of its flags and input files plus the
//! `--seed` value; reruns produce byte-identical outputs regardless of the
//! worker thread count.

pub mod args;
pub mod dataset;
pub mod evaluate;
pub mod infer;
pub mod reconstruct;
pub mod rng;
pub mod scenegen;
pub mod simulate;
pub mod stack;
pub mod train;

use thiserror::Error;

/// Command failures, split by exit code: rejected inputs or configuration
/// exit with 2, numerical breakdown during a run exits with 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("json: {e}"))
    }
}

impl From<tofu_core::CoreError> for CliError {
    fn from(e: tofu_core::CoreError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<tofu_sensor::SensorError> for CliError {
    fn from(e: tofu_sensor::SensorError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<tofu_phase::PhaseError> for CliError {
    fn from(e: tofu_phase::PhaseError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<tofu_geometry::GeometryError> for CliError {
    fn from(e: tofu_geometry::GeometryError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<tofu_metrics::MetricsError> for CliError {
    fn from(e: tofu_metrics::MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<tofu_nn::NnError> for CliError {
    fn from(e: tofu_nn::NnError) -> Self {
        match e {
            tofu_nn::NnError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Applies the `TOFU_THREADS` cap to the global worker pool. Called once at
/// startup; a pool that already exists is left alone.
pub fn init_threads() -> Result<(), CliError> {
    match std::env::var("TOFU_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                CliError::Validation(format!(
                    "TOFU_THREADS must be a positive integer, got {v:?}"
                ))
            })?;
            if n == 0 {
                return Err(CliError::Validation(
                    "TOFU_THREADS must be positive".into(),
                ));
            }
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
            Ok(())
        }
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(CliError::Validation(format!("TOFU_THREADS: {e}"))),
    }
}
