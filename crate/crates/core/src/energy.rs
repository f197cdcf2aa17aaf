//! Current-based DRAM energy accounting over a command stream.
//!
//! Energies are accumulated in picojoules (mA x V x ns) and reported in
//! joules.

use thiserror::Error;

use crate::dram::{CommandKind, Cycle, DramCommand, DramTopology, RowMode, TimingParams};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("command log out of order: cycle {got} after {last}")]
    OutOfOrder { last: Cycle, got: Cycle },
    #[error("power parameters invalid: {0}")]
    Params(String),
    #[error("no simulated time elapsed")]
    ZeroElapsed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerParams {
    pub vdd: f64,
    pub idd0: f64,
    pub idd2n: f64,
    pub idd3n: f64,
    pub idd4r: f64,
    pub idd4w: f64,
    pub idd5b: f64,
    pub chips_per_rank: u32,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            vdd: 1.2,
            idd0: 58.0,
            idd2n: 34.0,
            idd3n: 46.0,
            idd4r: 150.0,
            idd4w: 140.0,
            idd5b: 250.0,
            chips_per_rank: 8,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let all = [self.vdd, self.idd0, self.idd2n, self.idd3n, self.idd4r, self.idd4w, self.idd5b];
        if all.iter().any(|v| !(*v > 0.0)) || self.chips_per_rank == 0 {
            return Err(EnergyError::Params("all values must be positive".into()));
        }
        if !(self.idd0 > self.idd3n && self.idd3n > self.idd2n) {
            return Err(EnergyError::Params("expected IDD0 > IDD3N > IDD2N".into()));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.vdd * self.chips_per_rank as f64
    }

    /// ACT+PRE pair energy in pJ for a row with the given timings.
    pub fn act_pre_pj(&self, t: &TimingParams) -> f64 {
        (self.idd0 * t.t_rc() - self.idd3n * t.t_ras - self.idd2n * t.t_rp) * self.scale()
    }

    pub fn read_pj(&self, t: &TimingParams) -> f64 {
        (self.idd4r - self.idd3n) * t.t_bl * self.scale()
    }

    pub fn write_pj(&self, t: &TimingParams) -> f64 {
        (self.idd4w - self.idd3n) * t.t_bl * self.scale()
    }

    pub fn refresh_pj(&self, t: &TimingParams) -> f64 {
        (self.idd5b - self.idd3n) * t.t_rfc * self.scale()
    }
}

/// Accumulated energy per category, in joules.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    pub act_pre: f64,
    pub read: f64,
    pub write: f64,
    pub refresh: f64,
    pub background: f64,
    /// Simulated seconds.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub total: f64,
    pub avg_power: f64,
    pub refresh: f64,
    pub refresh_fraction: f64,
    pub ledger: EnergyLedger,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.act_pre + self.read + self.write + self.refresh + self.background
    }

    pub fn report(&self) -> Result<EnergyReport, EnergyError> {
        if self.elapsed <= 0.0 {
            return Err(EnergyError::ZeroElapsed);
        }
        let total = self.total();
        Ok(EnergyReport {
            total,
            avg_power: total / self.elapsed,
            refresh: self.refresh,
            refresh_fraction: if total > 0.0 { self.refresh / total } else { 0.0 },
            ledger: self.clone(),
        })
    }
}

#[derive(Debug, Clone)]
struct RankEnergy {
    open: Vec<Option<RowMode>>,
    open_count: usize,
    refresh_until: Cycle,
    active_cycles: u64,
    idle_cycles: u64,
}

/// Streaming fold of a time-ordered command log into an [`EnergyLedger`].
#[derive(Debug, Clone)]
pub struct EnergyAccountant {
    power: PowerParams,
    tck_ns: f64,
    banks_per_group: usize,
    /// Timing sets indexed by [`RowMode::index`].
    params: [TimingParams; 2],
    pj: [f64; 4],
    ranks: Vec<Vec<RankEnergy>>,
    last: Cycle,
    rfc_cycles: [Cycle; 2],
}

impl EnergyAccountant {
    pub fn new(topo: &DramTopology, power: PowerParams, mc: TimingParams, hp: TimingParams) -> Self {
        let tck = topo.tck_ns();
        let rank = RankEnergy {
            open: vec![None; topo.banks_per_rank() as usize],
            open_count: 0,
            refresh_until: 0,
            active_cycles: 0,
            idle_cycles: 0,
        };
        let rfc_cycles = [
            crate::dram::ns_to_cycles(mc.t_rfc, tck),
            crate::dram::ns_to_cycles(hp.t_rfc, tck),
        ];
        Self {
            power,
            tck_ns: tck,
            banks_per_group: topo.banks_per_bankgroup as usize,
            params: [mc, hp],
            pj: [0.0; 4],
            ranks: vec![vec![rank; topo.ranks_per_channel as usize]; topo.channels as usize],
            last: 0,
            rfc_cycles,
        }
    }

    fn advance(&mut self, to: Cycle) {
        let from = self.last;
        for ch in &mut self.ranks {
            for r in ch.iter_mut() {
                let span = to - from;
                if r.open_count > 0 {
                    r.active_cycles += span;
                } else {
                    let refresh = r.refresh_until.clamp(from, to) - from;
                    r.active_cycles += refresh;
                    r.idle_cycles += span - refresh;
                }
            }
        }
        self.last = to;
    }

    pub fn account(&mut self, cmd: &DramCommand) -> Result<(), EnergyError> {
        if cmd.issue_cycle < self.last {
            return Err(EnergyError::OutOfOrder {
                last: self.last,
                got: cmd.issue_cycle,
            });
        }
        self.advance(cmd.issue_cycle);
        let c = &cmd.coord;
        let bank = c.bankgroup as usize * self.banks_per_group + c.bank as usize;
        let rank = &mut self.ranks[c.channel as usize][c.rank as usize];
        match cmd.kind {
            CommandKind::Act => {
                if rank.open[bank].replace(cmd.mode).is_none() {
                    rank.open_count += 1;
                }
            }
            CommandKind::Pre => {
                if let Some(mode) = rank.open[bank].take() {
                    rank.open_count -= 1;
                    self.pj[0] += self.power.act_pre_pj(&self.params[mode.index()]);
                }
            }
            CommandKind::Rd => self.pj[1] += self.power.read_pj(&self.params[cmd.mode.index()]),
            CommandKind::Wr => self.pj[2] += self.power.write_pj(&self.params[cmd.mode.index()]),
            CommandKind::Ref => {
                self.pj[3] += self.power.refresh_pj(&self.params[cmd.mode.index()]);
                rank.refresh_until = rank
                    .refresh_until
                    .max(cmd.issue_cycle + self.rfc_cycles[cmd.mode.index()]);
            }
        }
        Ok(())
    }

    /// Closes the accounting at `end` (exclusive) and returns the ledger.
    pub fn finish(&mut self, end: Cycle) -> Result<EnergyLedger, EnergyError> {
        if end < self.last {
            return Err(EnergyError::OutOfOrder { last: self.last, got: end });
        }
        self.advance(end);
        let (mut active, mut idle) = (0u64, 0u64);
        for r in self.ranks.iter().flatten() {
            active += r.active_cycles;
            idle += r.idle_cycles;
        }
        let p = &self.power;
        let bg_pj = (p.idd3n * active as f64 + p.idd2n * idle as f64) * self.tck_ns * p.scale();
        const PJ: f64 = 1e-12;
        Ok(EnergyLedger {
            act_pre: self.pj[0] * PJ,
            read: self.pj[1] * PJ,
            write: self.pj[2] * PJ,
            refresh: self.pj[3] * PJ,
            background: bg_pj * PJ,
            elapsed: end as f64 * self.tck_ns * 1e-9,
        })
    }
}

/// Energy of a complete command log ending at `end`.
pub fn account_log(
    topo: &DramTopology,
    power: &PowerParams,
    mc: &TimingParams,
    hp: &TimingParams,
    cmds: &[DramCommand],
    end: Cycle,
) -> Result<EnergyLedger, EnergyError> {
    let mut acc = EnergyAccountant::new(topo, power.clone(), mc.clone(), hp.clone());
    for c in cmds {
        acc.account(c)?;
    }
    acc.finish(end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::DramCoord;
    use crate::dram::timing_for;

    fn cmd(kind: CommandKind, cycle: Cycle, mode: RowMode) -> DramCommand {
        let mut c = DramCommand::new(kind, DramCoord::default(), mode);
        c.issue_cycle = cycle;
        c
    }

    #[test]
    fn idle_background_only() {
        let topo = DramTopology::default();
        let p = PowerParams::default();
        let base = TimingParams::default();
        let l = account_log(&topo, &p, &base, &base, &[], 1_200_000).unwrap();
        let secs = 1e-3;
        let want = p.idd2n * 1e-3 * p.vdd * secs * 8.0;
        assert!((l.background - want).abs() < want * 1e-9);
        assert_eq!(l.total(), l.background);
        let r = l.report().unwrap();
        assert!((r.avg_power - p.idd2n * 1e-3 * p.vdd * 8.0).abs() < 1e-9);
    }

    #[test]
    fn hp_refresh_ratio() {
        let base = TimingParams::default();
        let hp = timing_for(RowMode::HighPerformance, true, 64.0, &base).unwrap();
        let p = PowerParams::default();
        let ratio = p.refresh_pj(&hp) / p.refresh_pj(&base);
        assert!((ratio - 0.4467).abs() < 1e-3);
    }

    #[test]
    fn out_of_order_rejected() {
        let topo = DramTopology::default();
        let base = TimingParams::default();
        let mut acc = EnergyAccountant::new(&topo, PowerParams::default(), base.clone(), base);
        acc.account(&cmd(CommandKind::Act, 10, RowMode::MaxCapacity)).unwrap();
        assert!(acc.account(&cmd(CommandKind::Pre, 5, RowMode::MaxCapacity)).is_err());
    }

    #[test]
    fn pair_charged_at_precharge() {
        let topo = DramTopology::default();
        let base = TimingParams::default();
        let p = PowerParams::default();
        let mut acc = EnergyAccountant::new(&topo, p.clone(), base.clone(), base.clone());
        acc.account(&cmd(CommandKind::Act, 0, RowMode::MaxCapacity)).unwrap();
        let mid = acc.clone().finish(10).unwrap();
        assert_eq!(mid.act_pre, 0.0);
        acc.account(&cmd(CommandKind::Pre, 60, RowMode::MaxCapacity)).unwrap();
        let l = acc.finish(100).unwrap();
        assert!((l.act_pre - p.act_pre_pj(&base) * 1e-12).abs() < 1e-20);
    }
}
