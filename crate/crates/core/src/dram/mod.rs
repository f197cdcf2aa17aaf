//! Device-side model: topology, per-mode timing sets and command legality.

mod bank;
mod timing;
mod topology;

pub use bank::{
    BankPhase, BankState, ChannelState, Cycle, CommandKind, DramCommand, IssueError, ModeTimings,
    RankState,
};
pub use timing::{
    ns_to_cycles, refw_is_interpolated, timing_for, timing_for_table, CellTimings, CycleTimings,
    ModeTimingTable, RowMode, TimingError, TimingParams, BASE_REFW_MS, MAX_REFW_MS, REFRESH_BINS,
    TRAS_GROWTH_AT_MAX_REFW_NS, TRCD_GROWTH_AT_MAX_REFW_NS,
};
pub use topology::{DramTopology, TopologyError};
