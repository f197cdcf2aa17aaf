//! Trace-driven cores, the shared last-level cache and throughput metrics.

mod core;
mod llc;

use thiserror::Error;

pub use self::core::{Core, CoreConfig, CoreStats, Mark, Outgoing};
pub use self::llc::{Eviction, Llc};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("alone IPC of core {0} is zero")]
    ZeroAloneIpc(usize),
    #[error("shared and alone IPC lists differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("geometric mean needs positive values")]
    NonPositive,
}

/// Sum over cores of shared IPC divided by alone IPC.
pub fn weighted_speedup(shared: &[f64], alone: &[f64]) -> Result<f64, MetricError> {
    if shared.len() != alone.len() {
        return Err(MetricError::Length(shared.len(), alone.len()));
    }
    shared
        .iter()
        .zip(alone)
        .enumerate()
        .map(|(i, (s, a))| if *a > 0.0 { Ok(s / a) } else { Err(MetricError::ZeroAloneIpc(i)) })
        .sum()
}

pub fn geomean(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
        return Err(MetricError::NonPositive);
    }
    Ok((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speedup_examples() {
        assert_eq!(weighted_speedup(&[1.3], &[1.3]).unwrap(), 1.0);
        assert_eq!(weighted_speedup(&[0.5, 1.0, 0.25, 2.0], &[1.0, 2.0, 0.5, 4.0]).unwrap(), 2.0);
        assert_eq!(weighted_speedup(&[1.0], &[0.0]), Err(MetricError::ZeroAloneIpc(0)));
    }

    #[test]
    fn geomean_basic() {
        assert!((geomean(&[1.0, 4.0, 16.0]).unwrap() - 4.0).abs() < 1e-12);
        assert!(geomean(&[]).is_err());
    }
}
