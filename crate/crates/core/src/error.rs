use thiserror::Error;

use crate::config::ConfigError;
use crate::controller::{ControllerError, LogError};
use crate::cpu::MetricError;
use crate::energy::EnergyError;
use crate::workload::{GenError, PlacementError, TraceError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("no forward progress for {0} core cycles")]
    Stalled(u64),
    #[error("{0}")]
    Invalid(String),
}
