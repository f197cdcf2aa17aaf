//! Parameter sweeps over the high-performance fraction and the refresh window.

use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{Device, SimConfig};
use crate::error::SimError;
use crate::sim::{run_with_speedup, RunOutput};
use crate::workload::TraceRecord;

pub const FRACTIONS: [f64; 5] = [0.0, 25.0, 50.0, 75.0, 100.0];
pub const REFRESH_WINDOWS_MS: [f64; 5] = [64.0, 114.0, 124.0, 184.0, 194.0];

/// One run per configuration, in parallel, results in input order.
pub fn run_all(
    configs: &[(SimConfig, String)],
    traces: &[Arc<Vec<TraceRecord>>],
) -> Result<Vec<RunOutput>, SimError> {
    configs
        .par_iter()
        .map(|(cfg, label)| run_with_speedup(cfg, traces, label))
        .collect()
}

/// DDR4 baseline followed by CLR at each fraction.
pub fn sweep_fraction(
    cfg: &SimConfig,
    traces: &[Arc<Vec<TraceRecord>>],
    fractions: &[f64],
) -> Result<Vec<RunOutput>, SimError> {
    let mut configs = Vec::with_capacity(fractions.len() + 1);
    let mut base = cfg.clone();
    base.device = Device::Ddr4;
    configs.push((base, "ddr4".to_string()));
    for &x in fractions {
        let mut c = cfg.clone();
        c.device = Device::Clr;
        c.hp_fraction = x;
        configs.push((c, format!("clr-x{x}")));
    }
    run_all(&configs, traces)
}

/// DDR4 baseline followed by all-high-performance CLR at each refresh window.
pub fn sweep_refresh(
    cfg: &SimConfig,
    traces: &[Arc<Vec<TraceRecord>>],
    windows_ms: &[f64],
) -> Result<Vec<RunOutput>, SimError> {
    let mut configs = Vec::with_capacity(windows_ms.len() + 1);
    let mut base = cfg.clone();
    base.device = Device::Ddr4;
    configs.push((base, "ddr4".to_string()));
    for &w in windows_ms {
        let mut c = cfg.clone();
        c.device = Device::Clr;
        c.hp_fraction = 100.0;
        c.trefw_ms = w;
        configs.push((c, format!("clr-{w}ms")));
    }
    run_all(&configs, traces)
}
