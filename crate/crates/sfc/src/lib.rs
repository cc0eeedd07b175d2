//! File formats, run reports and the benchmark harness around `sfc-core`.

pub mod bench;
pub mod cli;
pub mod report;
pub mod sfcmap;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SfcError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid {field}: {reason}")]
    Parse { field: &'static str, reason: String },
    #[error(transparent)]
    Core(#[from] sfc_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SfcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn parse(field: &'static str, reason: impl Into<String>) -> Self {
        Self::Parse { field, reason: reason.into() }
    }

    /// True when the failure is a query the planner cannot serve.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Self::Core(sfc_core::Error::InfeasibleQuery(_)))
    }
}

pub type Result<T, E = SfcError> = std::result::Result<T, E>;

/// Wall clock for timing fields.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(std::time::Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(std::time::Instant::now())
    }
}

impl sfc_core::solver::Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
