//! Experiment orchestration: configuration, Monte Carlo trials, baselines
//! and CSV output.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod pipeline;
pub mod scenario;

use thiserror::Error;

pub use config::{HarnessConfig, ModeName};
pub use experiment::{run_experiment, ExperimentKind, ExperimentReport, ExperimentSpec, MetricRow, PointSummary};
pub use metrics::{nmse, rmse_sorted, ParamFamily};
pub use pipeline::{baseline_als_cpd, baseline_exhaustive_cbs, run_trial, Method, MethodSelection};
pub use scenario::Scenario;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("length mismatch: truth has {truth} entries, estimate {est}")]
    LengthMismatch { truth: usize, est: usize },
    #[error("truth signal tensor has zero norm")]
    ZeroTruth,
    #[error(transparent)]
    Channel(#[from] crate::array::ChannelError),
    #[error(transparent)]
    Probing(#[from] crate::probing::ProbingError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Vscpd(#[from] crate::vscpd::VscpdError),
    #[error(transparent)]
    Estimator(#[from] crate::estimator::EstimatorError),
    #[error(transparent)]
    Crlb(#[from] crate::crlb::CrlbError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Errors raised before any trial runs.
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_))
    }
}
