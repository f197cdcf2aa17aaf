//! Cycle-level, trace-driven simulator of a capacity-latency-reconfigurable
//! DRAM next to a fixed DDR4 baseline.

pub mod address;
pub mod clr;
pub mod config;
pub mod controller;
pub mod cpu;
pub mod dram;
pub mod energy;
pub mod error;
pub mod output;
pub mod sim;
pub mod stats;
pub mod sweep;
pub mod workload;

pub use config::{Device, SimConfig};
pub use error::SimError;
pub use sim::{run_traces, run_with_speedup, MemorySystem, RunOutput};
pub use stats::StatsReport;
