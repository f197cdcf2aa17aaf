//! Memory controller: request queues, FR-FCFS-Cap scheduling with a
//! timeout-based row policy, and heterogeneous refresh.

mod log;
mod refresh;
mod request;

use std::collections::VecDeque;

use thiserror::Error;

pub use log::{read_command_log, write_command_log, LogError};
pub use refresh::{RefreshBin, RefreshError, RefreshPool, RefreshScheduler};
pub use request::{MemRequest, ReqKind, RequestQueue, RowOutcome};

use crate::address::DramCoord;
use crate::dram::{
    ChannelState, CommandKind, Cycle, DramCommand, DramTopology, IssueError, ModeTimings, RowMode,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ControllerError {
    #[error(transparent)]
    Issue(#[from] IssueError),
    #[error(transparent)]
    Refresh(#[from] RefreshError),
}

/// Resolves the operating mode of the row holding a coordinate.
pub trait RowModes {
    fn mode_of(&self, coord: &DramCoord) -> RowMode;
}

/// Every row in max-capacity mode (a conventional device).
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl RowModes for Uniform {
    fn mode_of(&self, _coord: &DramCoord) -> RowMode {
        RowMode::MaxCapacity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub read_queue: usize,
    pub write_queue: usize,
    /// Consecutive row-hit prioritizations allowed while an older request to
    /// a different row of the same bank waits.
    pub cap: u32,
    pub row_timeout_ns: f64,
    /// Enter write-drain mode at this write-queue occupancy fraction.
    pub write_high: f64,
    /// Leave write-drain mode at this write-queue occupancy fraction.
    pub write_low: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            read_queue: 64,
            write_queue: 64,
            cap: 16,
            row_timeout_ns: 120.0,
            write_high: 0.75,
            write_low: 0.25,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControllerStats {
    pub reads: u64,
    pub writes: u64,
    pub forwarded_reads: u64,
    pub row_hits: u64,
    pub row_misses: u64,
    pub row_conflicts: u64,
    pub commands: [u64; 5],
    pub refreshes_by_mode: [u64; 2],
    pub read_latency_total: u64,
    pub timeout_precharges: u64,
}

impl ControllerStats {
    pub fn command_count(&self, kind: CommandKind) -> u64 {
        self.commands[kind.index()]
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BankMeta {
    hit_streak: u32,
    last_use: Cycle,
}

/// One channel's controller.
#[derive(Debug, Clone)]
pub struct Controller {
    channel: u32,
    topo: DramTopology,
    state: ChannelState,
    timings: ModeTimings,
    cfg: SchedulerConfig,
    timeout: Cycle,
    reads: RequestQueue,
    writes: RequestQueue,
    refresh: Vec<RefreshScheduler>,
    refresh_pending: Vec<bool>,
    banks: Vec<BankMeta>,
    draining: bool,
    inflight_reads: VecDeque<MemRequest>,
    inflight_writes: VecDeque<MemRequest>,
    stats: ControllerStats,
    next_id: u64,
    last_cycle: Option<Cycle>,
}

impl Controller {
    pub fn new(
        channel: u32,
        topo: &DramTopology,
        timings: ModeTimings,
        cfg: SchedulerConfig,
        refresh: Vec<RefreshScheduler>,
    ) -> Self {
        assert_eq!(refresh.len() as u64, topo.ranks_per_channel);
        let timeout = crate::dram::ns_to_cycles(cfg.row_timeout_ns, topo.tck_ns());
        let nbanks = (topo.ranks_per_channel * topo.banks_per_rank()) as usize;
        Self {
            channel,
            topo: topo.clone(),
            state: ChannelState::new(topo),
            timings,
            timeout,
            reads: RequestQueue::new(cfg.read_queue),
            writes: RequestQueue::new(cfg.write_queue),
            refresh_pending: vec![false; refresh.len()],
            refresh,
            banks: vec![BankMeta::default(); nbanks],
            draining: false,
            inflight_reads: VecDeque::new(),
            inflight_writes: VecDeque::new(),
            stats: ControllerStats::default(),
            next_id: 0,
            cfg,
            last_cycle: None,
        }
    }

    pub fn channel(&self) -> u32 {
        self.channel
    }

    pub fn state(&self) -> &ChannelState {
        &self.state
    }

    pub fn timings(&self) -> &ModeTimings {
        &self.timings
    }

    pub fn stats(&self) -> &ControllerStats {
        &self.stats
    }

    pub fn refresh(&self) -> &[RefreshScheduler] {
        &self.refresh
    }

    pub fn read_queue(&self) -> &RequestQueue {
        &self.reads
    }

    pub fn write_queue(&self) -> &RequestQueue {
        &self.writes
    }

    pub fn is_idle(&self) -> bool {
        self.reads.is_empty()
            && self.writes.is_empty()
            && self.inflight_reads.is_empty()
            && self.inflight_writes.is_empty()
    }

    fn bank_index(&self, c: &DramCoord) -> usize {
        c.rank as usize * self.topo.banks_per_rank() as usize + c.flat_bank(&self.topo)
    }

    /// Queues a request. A full queue returns the request (back-pressure).
    pub fn enqueue(&mut self, mut req: MemRequest, now: Cycle) -> Result<(), MemRequest> {
        req.id = self.next_id;
        req.arrival_cycle = now;
        match req.kind {
            ReqKind::Read => {
                if self.reads.is_full() {
                    return Err(req);
                }
                if self.writes.iter().any(|w| w.line() == req.line()) {
                    // Served from the write queue.
                    req.complete(now);
                    self.stats.reads += 1;
                    self.stats.forwarded_reads += 1;
                    self.inflight_reads.push_front(req);
                } else {
                    self.reads.enqueue(req)?;
                }
            }
            ReqKind::Write => self.writes.enqueue(req)?,
        }
        self.next_id += 1;
        Ok(())
    }

    /// Pops a request whose data transfer has finished by `now`.
    pub fn pop_completed(&mut self, now: Cycle) -> Option<MemRequest> {
        for q in [&mut self.inflight_reads, &mut self.inflight_writes] {
            if q.front().is_some_and(|r| r.completion_cycle.unwrap_or(0) <= now) {
                return q.pop_front();
            }
        }
        None
    }

    /// Whether any bank of the channel has an open row.
    pub fn has_open_rows(&self) -> bool {
        self.state.ranks().iter().any(|r| r.open_banks() > 0)
    }

    /// Earliest cycle `>= now` at which ticking can change anything.
    pub fn next_wake(&self, now: Cycle) -> Cycle {
        if !self.is_idle() || self.has_open_rows() {
            return now;
        }
        self.refresh
            .iter()
            .filter_map(RefreshScheduler::next_eligible)
            .min()
            .map_or(Cycle::MAX, |c| c.max(now))
    }

    fn issue(&mut self, mut cmd: DramCommand, now: Cycle) -> Result<DramCommand, ControllerError> {
        cmd.coord.channel = self.channel;
        cmd.issue_cycle = now;
        self.state.issue(&cmd, now, &self.timings)?;
        self.stats.commands[cmd.kind.index()] += 1;
        if cmd.kind != CommandKind::Ref {
            let b = self.bank_index(&cmd.coord);
            match cmd.kind {
                CommandKind::Act => {
                    self.banks[b].hit_streak = 0;
                    self.banks[b].last_use = now;
                }
                CommandKind::Rd | CommandKind::Wr => self.banks[b].last_use = now,
                _ => {}
            }
        }
        Ok(cmd)
    }

    /// Advances one controller cycle and issues at most one command.
    pub fn tick(&mut self, now: Cycle, modes: &dyn RowModes) -> Result<Option<DramCommand>, ControllerError> {
        debug_assert!(self.last_cycle.is_none_or(|c| now > c));
        self.last_cycle = Some(now);
        if let Some(cmd) = self.tick_refresh(now)? {
            return Ok(Some(cmd));
        }
        if self.reads.is_empty() && self.writes.is_empty() {
            return self.tick_timeout(now);
        }
        let wq = self.writes.len() as f64 / self.writes.capacity() as f64;
        if self.draining {
            self.draining = wq > self.cfg.write_low;
        } else {
            self.draining = wq >= self.cfg.write_high;
        }
        let use_writes = self.draining || (self.reads.is_empty() && !self.writes.is_empty());
        if let Some(cmd) = self.tick_queue(now, use_writes, modes)? {
            return Ok(Some(cmd));
        }
        self.tick_timeout(now)
    }

    fn tick_refresh(&mut self, now: Cycle) -> Result<Option<DramCommand>, ControllerError> {
        for r in 0..self.refresh.len() {
            let Some(pool) = self.refresh[r].due(now)? else {
                self.refresh_pending[r] = false;
                continue;
            };
            self.refresh_pending[r] = true;
            let p = &self.refresh[r].pools()[pool];
            let mode = p.mode();
            let slot = p.next_bin().map(|b| b.slot).unwrap_or(0);
            let cmd = DramCommand::new(
                CommandKind::Ref,
                DramCoord {
                    channel: self.channel,
                    rank: r as u32,
                    row: slot,
                    ..Default::default()
                },
                mode,
            );
            if self.state.can_issue(&cmd, now, &self.timings) {
                self.refresh[r].record(pool, now);
                let cmd = self.issue(cmd, now)?;
                self.stats.refreshes_by_mode[mode.index()] += 1;
                return Ok(Some(cmd));
            }
            // Close the rank's open rows first.
            let rank = self.state.rank(r as u32);
            let bpg = self.topo.banks_per_bankgroup as u32;
            let mut pre = None;
            for (i, bank) in rank.banks().iter().enumerate() {
                let Some(row) = bank.open_row() else { continue };
                let coord = DramCoord {
                    channel: self.channel,
                    rank: r as u32,
                    bankgroup: i as u32 / bpg,
                    bank: i as u32 % bpg,
                    row,
                    ..Default::default()
                };
                let c = DramCommand::new(CommandKind::Pre, coord, bank.open_mode().unwrap_or_default());
                if self.state.can_issue(&c, now, &self.timings) {
                    pre = Some(c);
                    break;
                }
            }
            if let Some(c) = pre {
                return self.issue(c, now).map(Some);
            }
        }
        Ok(None)
    }

    fn tick_queue(
        &mut self,
        now: Cycle,
        use_writes: bool,
        modes: &dyn RowModes,
    ) -> Result<Option<DramCommand>, ControllerError> {
        let nbanks = self.banks.len();
        let queue = if use_writes { &self.writes } else { &self.reads };
        // Oldest waiting request per bank that targets a row other than the open one.
        let mut oldest_conflict = vec![usize::MAX; nbanks];
        for (pos, req) in queue.iter().enumerate() {
            let b = self.bank_index(&req.coord);
            if let Some(open) = self.state.bank(&req.coord).open_row() {
                if open != req.coord.row && oldest_conflict[b] == usize::MAX {
                    oldest_conflict[b] = pos;
                }
            }
        }
        let capped = |meta: &BankMeta, b: usize, pos: usize| meta.hit_streak >= self.cfg.cap && oldest_conflict[b] < pos;

        // First ready: oldest legal, uncapped row hit.
        let mut has_live_hit = vec![false; nbanks];
        let mut chosen = None;
        for (pos, req) in queue.iter().enumerate() {
            if self.refresh_pending[req.coord.rank as usize] {
                continue;
            }
            let bank = self.state.bank(&req.coord);
            if bank.open_row() != Some(req.coord.row) {
                continue;
            }
            let b = self.bank_index(&req.coord);
            if capped(&self.banks[b], b, pos) {
                continue;
            }
            has_live_hit[b] = true;
            if chosen.is_none() {
                let kind = if use_writes { CommandKind::Wr } else { CommandKind::Rd };
                let cmd = DramCommand::new(kind, req.coord, bank.open_mode().unwrap_or_default());
                if self.state.can_issue(&cmd, now, &self.timings) {
                    chosen = Some((pos, cmd, oldest_conflict[b] < pos));
                }
            }
        }
        if let Some((pos, cmd, bypassed)) = chosen {
            let cmd = self.issue(cmd, now)?;
            let b = self.bank_index(&cmd.coord);
            if bypassed {
                self.banks[b].hit_streak += 1;
            }
            self.finish_column(pos, use_writes, now);
            return Ok(Some(cmd));
        }

        // First come: the oldest request of each bank gets its next command.
        let mut seen = vec![false; nbanks];
        let queue = if use_writes { &self.writes } else { &self.reads };
        let mut pick = None;
        for (pos, req) in queue.iter().enumerate() {
            if self.refresh_pending[req.coord.rank as usize] {
                continue;
            }
            let b = self.bank_index(&req.coord);
            if std::mem::replace(&mut seen[b], true) {
                continue;
            }
            let bank = self.state.bank(&req.coord);
            let cmd = match bank.open_row() {
                Some(open) if open == req.coord.row => continue,
                Some(_) => {
                    if has_live_hit[b] {
                        continue;
                    }
                    let mut c = req.coord;
                    c.row = bank.open_row().unwrap_or(c.row);
                    DramCommand::new(CommandKind::Pre, c, bank.open_mode().unwrap_or_default())
                }
                None => DramCommand::new(CommandKind::Act, req.coord, modes.mode_of(&req.coord)),
            };
            if self.state.can_issue(&cmd, now, &self.timings) {
                pick = Some((pos, cmd));
                break;
            }
        }
        if let Some((pos, cmd)) = pick {
            let q = if use_writes { &mut self.writes } else { &mut self.reads };
            let req = q.get_mut(pos);
            match cmd.kind {
                CommandKind::Pre => req.needed_pre = true,
                CommandKind::Act => req.needed_act = true,
                _ => {}
            }
            return self.issue(cmd, now).map(Some);
        }
        Ok(None)
    }

    fn finish_column(&mut self, pos: usize, is_write: bool, now: Cycle) {
        let t = self.timings.shared();
        let (latency, mut req) = if is_write {
            (t.write_latency(), self.writes.remove(pos))
        } else {
            (t.read_latency(), self.reads.remove(pos))
        };
        let outcome = req.complete(now + latency);
        match outcome {
            RowOutcome::Hit => self.stats.row_hits += 1,
            RowOutcome::Miss => self.stats.row_misses += 1,
            RowOutcome::Conflict => self.stats.row_conflicts += 1,
        }
        if is_write {
            self.stats.writes += 1;
            self.inflight_writes.push_back(req);
        } else {
            self.stats.reads += 1;
            self.stats.read_latency_total += now + latency - req.arrival_cycle;
            self.inflight_reads.push_back(req);
        }
    }

    /// Closes rows left idle for the timeout with no queued request to them.
    fn tick_timeout(&mut self, now: Cycle) -> Result<Option<DramCommand>, ControllerError> {
        let bpr = self.topo.banks_per_rank() as usize;
        let bpg = self.topo.banks_per_bankgroup as usize;
        for (b, meta) in self.banks.iter().enumerate() {
            if now < meta.last_use + self.timeout {
                continue;
            }
            let coord0 = DramCoord {
                channel: self.channel,
                rank: (b / bpr) as u32,
                bankgroup: ((b % bpr) / bpg) as u32,
                bank: (b % bpg) as u32,
                ..Default::default()
            };
            let bank = self.state.bank(&coord0);
            let Some(row) = bank.open_row() else { continue };
            let coord = DramCoord { row, ..coord0 };
            if self.reads.same_row(&coord).next().is_some() || self.writes.same_row(&coord).next().is_some() {
                continue;
            }
            let cmd = DramCommand::new(CommandKind::Pre, coord, bank.open_mode().unwrap_or_default());
            if self.state.can_issue(&cmd, now, &self.timings) {
                self.stats.timeout_precharges += 1;
                return self.issue(cmd, now).map(Some);
            }
        }
        Ok(None)
    }

    /// Coordinates of every open row.
    pub fn open_rows(&self) -> Vec<DramCoord> {
        let bpg = self.topo.banks_per_bankgroup as u32;
        let mut out = Vec::new();
        for (r, rank) in self.state.ranks().iter().enumerate() {
            for (i, bank) in rank.banks().iter().enumerate() {
                if let Some(row) = bank.open_row() {
                    out.push(DramCoord {
                        channel: self.channel,
                        rank: r as u32,
                        bankgroup: i as u32 / bpg,
                        bank: i as u32 % bpg,
                        row,
                        ..Default::default()
                    });
                }
            }
        }
        out
    }
}
