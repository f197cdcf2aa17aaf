//! Command legality state machines for banks, ranks and the channel.

use std::fmt;

use thiserror::Error;

use super::timing::{CycleTimings, RowMode};
use super::topology::DramTopology;
use crate::address::DramCoord;

pub type Cycle = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandKind {
    Act,
    Pre,
    Rd,
    Wr,
    Ref,
}

impl CommandKind {
    pub const ALL: [CommandKind; 5] = [
        CommandKind::Act,
        CommandKind::Pre,
        CommandKind::Rd,
        CommandKind::Wr,
        CommandKind::Ref,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Pre => "PRE",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::Ref => "REF",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        CommandKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_column(self) -> bool {
        matches!(self, CommandKind::Rd | CommandKind::Wr)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A device-level command.
///
/// `mode` is the operating mode of the target row for ACT, of the open row
/// for PRE/RD/WR, and of the refresh pool for REF. For REF the `row` field of
/// `coord` carries the refresh bin index and the bank fields are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DramCommand {
    pub kind: CommandKind,
    pub coord: DramCoord,
    pub mode: RowMode,
    pub issue_cycle: Cycle,
}

impl DramCommand {
    pub fn new(kind: CommandKind, coord: DramCoord, mode: RowMode) -> Self {
        Self {
            kind,
            coord,
            mode,
            issue_cycle: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankPhase {
    Idle,
    Activating,
    Active,
    Precharging,
    Refreshing,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IssueError {
    #[error("timing violation: {kind} to {coord:?} at cycle {cycle} is not legal")]
    TimingViolation {
        kind: CommandKind,
        coord: DramCoord,
        cycle: Cycle,
    },
    #[error("coordinate {0:?} outside the topology")]
    OutOfBounds(DramCoord),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankState {
    open_row: Option<u32>,
    open_mode: RowMode,
    phase: BankPhase,
    /// Cycle at which a transient phase (Activating, Precharging, Refreshing) ends.
    settle: Cycle,
    /// Earliest PRE, fixed by tRAS/tRTP/tWR of commands already issued.
    pre_ready: Cycle,
    last_cmd: [Option<Cycle>; 5],
}

impl Default for BankState {
    fn default() -> Self {
        Self {
            open_row: None,
            open_mode: RowMode::MaxCapacity,
            phase: BankPhase::Idle,
            settle: 0,
            pre_ready: 0,
            last_cmd: [None; 5],
        }
    }
}

impl BankState {
    pub fn phase_at(&self, cycle: Cycle) -> BankPhase {
        match self.phase {
            BankPhase::Activating if cycle >= self.settle => BankPhase::Active,
            BankPhase::Precharging | BankPhase::Refreshing if cycle >= self.settle => {
                BankPhase::Idle
            }
            p => p,
        }
    }

    pub fn open_row(&self) -> Option<u32> {
        self.open_row
    }

    /// Mode of the currently open row.
    pub fn open_mode(&self) -> Option<RowMode> {
        self.open_row.map(|_| self.open_mode)
    }

    pub fn last_cmd_cycle(&self, kind: CommandKind) -> Option<Cycle> {
        self.last_cmd[kind.index()]
    }

    pub fn is_open(&self) -> bool {
        self.open_row.is_some()
    }
}

/// Timing sets indexed by [`RowMode`]. A conventional device uses the same
/// set for both entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeTimings(pub [CycleTimings; 2]);

impl ModeTimings {
    pub fn uniform(t: CycleTimings) -> Self {
        Self([t, t])
    }

    pub fn get(&self, mode: RowMode) -> &CycleTimings {
        &self.0[mode.index()]
    }

    /// Mode-independent constraints (bus, activation windows, column spacing).
    pub fn shared(&self) -> &CycleTimings {
        &self.0[0]
    }
}

#[derive(Debug, Clone)]
pub struct RankState {
    banks: Vec<BankState>,
    banks_per_group: usize,
    bg_last_act: Vec<Option<Cycle>>,
    bg_last_rd: Vec<Option<Cycle>>,
    bg_last_wr: Vec<Option<Cycle>>,
    last_act: Option<Cycle>,
    /// Sliding window of the last four ACT cycles, oldest first.
    act_window: [Option<Cycle>; 4],
    refresh_until: Cycle,
    last_ref: Option<Cycle>,
    open_banks: usize,
}

impl RankState {
    fn new(topo: &DramTopology) -> Self {
        let groups = topo.bankgroups_per_rank as usize;
        Self {
            banks: vec![BankState::default(); topo.banks_per_rank() as usize],
            banks_per_group: topo.banks_per_bankgroup as usize,
            bg_last_act: vec![None; groups],
            bg_last_rd: vec![None; groups],
            bg_last_wr: vec![None; groups],
            last_act: None,
            act_window: [None; 4],
            refresh_until: 0,
            last_ref: None,
            open_banks: 0,
        }
    }

    pub fn bank(&self, bankgroup: u32, bank: u32) -> &BankState {
        &self.banks[bankgroup as usize * self.banks_per_group + bank as usize]
    }

    pub fn banks(&self) -> &[BankState] {
        &self.banks
    }

    pub fn open_banks(&self) -> usize {
        self.open_banks
    }

    pub fn refresh_until(&self) -> Cycle {
        self.refresh_until
    }

    pub fn last_ref(&self) -> Option<Cycle> {
        self.last_ref
    }

    /// The last four ACT cycles, oldest first.
    pub fn act_history(&self) -> impl Iterator<Item = Cycle> + '_ {
        self.act_window.iter().flatten().copied()
    }

    fn push_act(&mut self, cycle: Cycle) {
        self.act_window.rotate_left(1);
        self.act_window[3] = Some(cycle);
    }
}

fn after(last: Option<Cycle>, gap: u64) -> Cycle {
    last.map_or(0, |c| c + gap)
}

/// Command-legality state of one channel.
#[derive(Debug, Clone)]
pub struct ChannelState {
    topo: DramTopology,
    ranks: Vec<RankState>,
    last_rd: Option<Cycle>,
    last_wr: Option<Cycle>,
    /// Rank of the most recent RD/WR, for the same/different bank-group checks.
    last_rd_rank: usize,
    last_wr_rank: usize,
}

impl ChannelState {
    pub fn new(topo: &DramTopology) -> Self {
        Self {
            topo: topo.clone(),
            ranks: (0..topo.ranks_per_channel).map(|_| RankState::new(topo)).collect(),
            last_rd: None,
            last_wr: None,
            last_rd_rank: 0,
            last_wr_rank: 0,
        }
    }

    pub fn rank(&self, rank: u32) -> &RankState {
        &self.ranks[rank as usize]
    }

    pub fn ranks(&self) -> &[RankState] {
        &self.ranks
    }

    pub fn bank(&self, coord: &DramCoord) -> &BankState {
        self.ranks[coord.rank as usize].bank(coord.bankgroup, coord.bank)
    }

    fn in_bounds(&self, cmd: &DramCommand) -> bool {
        let c = &cmd.coord;
        let t = &self.topo;
        (c.rank as u64) < t.ranks_per_channel
            && (c.bankgroup as u64) < t.bankgroups_per_rank
            && (c.bank as u64) < t.banks_per_bankgroup
            && match cmd.kind {
                CommandKind::Ref => true,
                _ => (c.row as u64) < t.rows_per_bank() && (c.column as u64) < t.columns_per_row,
            }
    }

    /// Smallest cycle at which `cmd` could be issued given the commands issued
    /// so far, or `None` if the bank is in a state where the command can never
    /// become legal without another command first (e.g. RD to a closed bank).
    ///
    /// The result is a lower bound only in the "cycle >= x" sense; it does not
    /// depend on the current cycle.
    pub fn earliest(&self, cmd: &DramCommand, timings: &ModeTimings) -> Option<Cycle> {
        if !self.in_bounds(cmd) {
            return None;
        }
        let c = &cmd.coord;
        let rank = &self.ranks[c.rank as usize];
        let shared = timings.shared();
        let bg = c.bankgroup as usize;
        let mut t = rank.refresh_until;
        match cmd.kind {
            CommandKind::Act => {
                let bank = rank.bank(c.bankgroup, c.bank);
                match bank.phase {
                    BankPhase::Idle | BankPhase::Precharging | BankPhase::Refreshing => {}
                    BankPhase::Activating | BankPhase::Active => return None,
                }
                t = t.max(bank.settle);
                for (g, last) in rank.bg_last_act.iter().enumerate() {
                    let gap = if g == bg { shared.rrd_l } else { shared.rrd_s };
                    t = t.max(after(*last, gap));
                }
                if let Some(oldest) = rank.act_window[0] {
                    t = t.max(oldest + shared.faw);
                }
            }
            CommandKind::Pre => {
                let bank = rank.bank(c.bankgroup, c.bank);
                if bank.open_row.is_none() {
                    return None;
                }
                t = t.max(bank.pre_ready);
            }
            CommandKind::Rd | CommandKind::Wr => {
                let bank = rank.bank(c.bankgroup, c.bank);
                if bank.open_row != Some(c.row) {
                    return None;
                }
                t = t.max(bank.settle);
                let is_rd = cmd.kind == CommandKind::Rd;
                let same_rank = |r: usize| r == c.rank as usize;
                if is_rd {
                    t = t.max(after(rank.bg_last_rd[bg], shared.ccd_l));
                    t = t.max(after(rank.bg_last_wr[bg], shared.wr_to_rd(true)));
                    t = t.max(after(self.last_rd, shared.ccd_s));
                    let gap = if same_rank(self.last_wr_rank) {
                        shared.wr_to_rd(false)
                    } else {
                        shared.write_latency()
                    };
                    t = t.max(after(self.last_wr, gap));
                } else {
                    t = t.max(after(rank.bg_last_wr[bg], shared.ccd_l));
                    t = t.max(after(rank.bg_last_rd[bg], shared.rd_to_wr));
                    t = t.max(after(self.last_wr, shared.ccd_s));
                    t = t.max(after(self.last_rd, shared.rd_to_wr));
                }
            }
            CommandKind::Ref => {
                for bank in &rank.banks {
                    if bank.open_row.is_some() {
                        return None;
                    }
                    t = t.max(bank.settle);
                }
            }
        }
        Some(t)
    }

    /// Pure legality predicate.
    pub fn can_issue(&self, cmd: &DramCommand, cycle: Cycle, timings: &ModeTimings) -> bool {
        self.earliest(cmd, timings).is_some_and(|t| cycle >= t)
    }

    /// Smallest cycle `>= now` at which the command is legal.
    pub fn min_cycle_for(&self, cmd: &DramCommand, now: Cycle, timings: &ModeTimings) -> Option<Cycle> {
        self.earliest(cmd, timings).map(|t| t.max(now))
    }

    /// Applies a command. Illegal commands are a simulator bug and are reported
    /// as a hard fault rather than tolerated.
    pub fn issue(&mut self, cmd: &DramCommand, cycle: Cycle, timings: &ModeTimings) -> Result<(), IssueError> {
        if !self.in_bounds(cmd) {
            return Err(IssueError::OutOfBounds(cmd.coord));
        }
        if !self.can_issue(cmd, cycle, timings) {
            return Err(IssueError::TimingViolation {
                kind: cmd.kind,
                coord: cmd.coord,
                cycle,
            });
        }
        let c = cmd.coord;
        let bg = c.bankgroup as usize;
        let rank_idx = c.rank as usize;
        let rank = &mut self.ranks[rank_idx];
        match cmd.kind {
            CommandKind::Act => {
                let t = timings.get(cmd.mode);
                let bank = &mut rank.banks[bg * rank.banks_per_group + c.bank as usize];
                bank.open_row = Some(c.row);
                bank.open_mode = cmd.mode;
                bank.phase = BankPhase::Activating;
                bank.settle = cycle + t.rcd;
                bank.pre_ready = cycle + t.ras;
                bank.last_cmd[cmd.kind.index()] = Some(cycle);
                rank.bg_last_act[bg] = Some(cycle);
                rank.last_act = Some(cycle);
                rank.push_act(cycle);
                rank.open_banks += 1;
            }
            CommandKind::Pre => {
                let bank = &mut rank.banks[bg * rank.banks_per_group + c.bank as usize];
                let t = timings.get(bank.open_mode);
                bank.open_row = None;
                bank.phase = BankPhase::Precharging;
                bank.settle = cycle + t.rp;
                bank.last_cmd[cmd.kind.index()] = Some(cycle);
                rank.open_banks -= 1;
            }
            CommandKind::Rd | CommandKind::Wr => {
                let bank = &mut rank.banks[bg * rank.banks_per_group + c.bank as usize];
                let t = timings.get(bank.open_mode);
                bank.phase = BankPhase::Active;
                let ready = if cmd.kind == CommandKind::Rd {
                    cycle + t.rtp
                } else {
                    cycle + t.wr_to_pre()
                };
                bank.pre_ready = bank.pre_ready.max(ready);
                bank.last_cmd[cmd.kind.index()] = Some(cycle);
                if cmd.kind == CommandKind::Rd {
                    rank.bg_last_rd[bg] = Some(cycle);
                    self.last_rd = Some(cycle);
                    self.last_rd_rank = rank_idx;
                } else {
                    rank.bg_last_wr[bg] = Some(cycle);
                    self.last_wr = Some(cycle);
                    self.last_wr_rank = rank_idx;
                }
            }
            CommandKind::Ref => {
                let t = timings.get(cmd.mode);
                let until = cycle + t.rfc;
                rank.refresh_until = until;
                rank.last_ref = Some(cycle);
                for bank in &mut rank.banks {
                    bank.phase = BankPhase::Refreshing;
                    bank.settle = until;
                    bank.last_cmd[cmd.kind.index()] = Some(cycle);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::timing::{timing_for, TimingParams};

    fn baseline() -> (ChannelState, ModeTimings) {
        let topo = DramTopology::default();
        let t = TimingParams::default().to_cycles(topo.tck_ns());
        (ChannelState::new(&topo), ModeTimings::uniform(t))
    }

    fn clr() -> (ChannelState, ModeTimings) {
        let topo = DramTopology::default();
        let base = TimingParams::default();
        let mc = timing_for(RowMode::MaxCapacity, true, 64.0, &base).unwrap();
        let hp = timing_for(RowMode::HighPerformance, true, 64.0, &base).unwrap();
        (
            ChannelState::new(&topo),
            ModeTimings([mc.to_cycles(topo.tck_ns()), hp.to_cycles(topo.tck_ns())]),
        )
    }

    fn cmd(kind: CommandKind, bg: u32, bank: u32, row: u32, mode: RowMode) -> DramCommand {
        DramCommand::new(
            kind,
            DramCoord {
                bankgroup: bg,
                bank,
                row,
                ..Default::default()
            },
            mode,
        )
    }

    #[test]
    fn act_then_read_respects_trcd() {
        let (mut ch, t) = baseline();
        let act = cmd(CommandKind::Act, 0, 0, 7, RowMode::MaxCapacity);
        ch.issue(&act, 0, &t).unwrap();
        let rcd = 17; // ceil(13.8 ns / 0.833 ns)
        let rd = cmd(CommandKind::Rd, 0, 0, 7, RowMode::MaxCapacity);
        assert!(!ch.can_issue(&rd, rcd - 1, &t));
        assert!(ch.can_issue(&rd, rcd, &t));
        assert_eq!(ch.bank(&act.coord).phase_at(rcd - 1), BankPhase::Activating);
        assert_eq!(ch.bank(&act.coord).phase_at(rcd), BankPhase::Active);
    }

    #[test]
    fn precharge_right_after_activate_is_illegal() {
        let (mut ch, t) = baseline();
        ch.issue(&cmd(CommandKind::Act, 0, 0, 7, RowMode::MaxCapacity), 0, &t)
            .unwrap();
        let pre = cmd(CommandKind::Pre, 0, 0, 7, RowMode::MaxCapacity);
        assert!(!ch.can_issue(&pre, 1, &t));
        // ceil(39.4 ns / 0.833 ns) = 48
        assert_eq!(ch.min_cycle_for(&pre, 0, &t), Some(48));
    }

    #[test]
    fn hp_precharge_earliest() {
        let (mut ch, t) = clr();
        ch.issue(&cmd(CommandKind::Act, 1, 2, 3, RowMode::HighPerformance), 0, &t)
            .unwrap();
        let pre = cmd(CommandKind::Pre, 1, 2, 3, RowMode::HighPerformance);
        // ceil(14.1 ns / 0.833 ns) = 17
        assert_eq!(ch.min_cycle_for(&pre, 0, &t), Some(17));
    }

    #[test]
    fn transitions() {
        let (mut ch, t) = baseline();
        let act = cmd(CommandKind::Act, 0, 0, 7, RowMode::MaxCapacity);
        ch.issue(&act, 0, &t).unwrap();
        let b = ch.bank(&act.coord);
        assert_eq!(b.phase_at(0), BankPhase::Activating);
        assert_eq!(b.open_row(), Some(7));
        ch.issue(&cmd(CommandKind::Pre, 0, 0, 7, RowMode::MaxCapacity), 48, &t)
            .unwrap();
        let b = ch.bank(&act.coord);
        assert_eq!(b.phase_at(48), BankPhase::Precharging);
        assert_eq!(b.open_row(), None);
        assert_eq!(b.phase_at(48 + 19), BankPhase::Idle);
    }

    #[test]
    fn read_while_idle_faults() {
        let (mut ch, t) = baseline();
        let rd = cmd(CommandKind::Rd, 0, 0, 7, RowMode::MaxCapacity);
        assert!(matches!(
            ch.issue(&rd, 100, &t),
            Err(IssueError::TimingViolation { kind: CommandKind::Rd, .. })
        ));
        assert_eq!(ch.min_cycle_for(&rd, 0, &t), None);
    }

    #[test]
    fn idle_bank_activates_now() {
        let (ch, t) = baseline();
        let act = cmd(CommandKind::Act, 0, 0, 1, RowMode::MaxCapacity);
        assert_eq!(ch.min_cycle_for(&act, 1234, &t), Some(1234));
    }

    #[test]
    fn activation_spacing_and_four_activate_window() {
        let (mut ch, t) = baseline();
        let s = t.shared();
        let mut now = 0;
        let mut acts = vec![];
        for bg in 0..4u32 {
            let a = cmd(CommandKind::Act, bg, 0, 1, RowMode::MaxCapacity);
            now = ch.min_cycle_for(&a, now, &t).unwrap();
            ch.issue(&a, now, &t).unwrap();
            acts.push(now);
        }
        assert_eq!(acts[1] - acts[0], s.rrd_s);
        let fifth = cmd(CommandKind::Act, 0, 1, 1, RowMode::MaxCapacity);
        assert_eq!(
            ch.min_cycle_for(&fifth, now, &t),
            Some((acts[0] + s.faw).max(acts[3] + s.rrd_s).max(acts[0] + s.rrd_l))
        );
    }

    #[test]
    fn refresh_blocks_rank() {
        let (mut ch, t) = baseline();
        let r = DramCommand::new(CommandKind::Ref, DramCoord::default(), RowMode::MaxCapacity);
        ch.issue(&r, 10, &t).unwrap();
        let act = cmd(CommandKind::Act, 2, 2, 5, RowMode::MaxCapacity);
        assert_eq!(ch.min_cycle_for(&act, 10, &t), Some(10 + t.shared().rfc));
        assert_eq!(ch.bank(&act.coord).phase_at(11), BankPhase::Refreshing);
    }

    #[test]
    fn refresh_needs_closed_banks() {
        let (mut ch, t) = baseline();
        ch.issue(&cmd(CommandKind::Act, 0, 0, 7, RowMode::MaxCapacity), 0, &t)
            .unwrap();
        let r = DramCommand::new(CommandKind::Ref, DramCoord::default(), RowMode::MaxCapacity);
        assert!(!ch.can_issue(&r, 10_000, &t));
    }

    #[test]
    fn write_recovery_delays_precharge() {
        let (mut ch, t) = baseline();
        let s = *t.shared();
        ch.issue(&cmd(CommandKind::Act, 0, 0, 7, RowMode::MaxCapacity), 0, &t)
            .unwrap();
        ch.issue(&cmd(CommandKind::Wr, 0, 0, 7, RowMode::MaxCapacity), s.rcd, &t)
            .unwrap();
        let pre = cmd(CommandKind::Pre, 0, 0, 7, RowMode::MaxCapacity);
        assert_eq!(
            ch.min_cycle_for(&pre, 0, &t),
            Some((s.rcd + s.cwl + s.bl + s.wr).max(s.ras))
        );
    }
}
