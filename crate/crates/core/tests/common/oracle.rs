//! Brute-force command-log checker. It re-derives cycle timings from the
//! nanosecond parameters, replays bank open/closed state and compares every
//! command against every earlier command inside the longest constraint span.

use std::collections::HashMap;

use clr_sim::dram::{CommandKind, DramCommand, DramTopology, RowMode, TimingParams};

#[derive(Debug, Clone, Copy)]
struct ModeCycles {
    rcd: u64,
    ras: u64,
    rp: u64,
    wr: u64,
    rfc: u64,
}

#[derive(Debug, Clone)]
pub struct OracleTimings {
    modes: [ModeCycles; 2],
    rrd_s: u64,
    rrd_l: u64,
    faw: u64,
    ccd_s: u64,
    ccd_l: u64,
    rtp: u64,
    wtr_s: u64,
    wtr_l: u64,
    cl: u64,
    cwl: u64,
    bl: u64,
}

fn cyc(ns: f64, tck: f64) -> u64 {
    let x = ns / tck;
    let r = x.round();
    if (x - r).abs() < 1e-6 {
        r as u64
    } else {
        x.ceil() as u64
    }
}

impl OracleTimings {
    /// `params[0]` applies to max-capacity rows, `params[1]` to high-performance rows.
    pub fn new(params: &[TimingParams; 2], tck: f64) -> Self {
        let m = |p: &TimingParams| ModeCycles {
            rcd: cyc(p.t_rcd, tck),
            ras: cyc(p.t_ras, tck),
            rp: cyc(p.t_rp, tck),
            wr: cyc(p.t_wr, tck),
            rfc: cyc(p.t_rfc, tck),
        };
        let s = &params[0];
        Self {
            modes: [m(&params[0]), m(&params[1])],
            rrd_s: cyc(s.t_rrd_s, tck),
            rrd_l: cyc(s.t_rrd_l, tck),
            faw: cyc(s.t_faw, tck),
            ccd_s: cyc(s.t_ccd_s, tck),
            ccd_l: cyc(s.t_ccd_l, tck),
            rtp: cyc(s.t_rtp, tck),
            wtr_s: cyc(s.t_wtr_s, tck),
            wtr_l: cyc(s.t_wtr_l, tck),
            cl: cyc(s.cl, tck),
            cwl: cyc(s.cwl, tck),
            bl: cyc(s.t_bl, tck),
        }
    }

    fn m(&self, mode: RowMode) -> &ModeCycles {
        match mode {
            RowMode::MaxCapacity => &self.modes[0],
            RowMode::HighPerformance => &self.modes[1],
        }
    }

    fn span(&self) -> u64 {
        let mut s = self.faw.max(self.cl + self.bl + 2).max(self.cwl + self.bl + self.wtr_l);
        for m in &self.modes {
            s = s.max(m.rfc).max(m.ras + m.rp).max(self.cwl + self.bl + m.wr);
        }
        s + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub cycle: u64,
    pub kind: CommandKind,
    pub rule: String,
}

type BankKey = (u32, u32, u32, u32);

fn bank_key(c: &DramCommand) -> BankKey {
    (c.coord.channel, c.coord.rank, c.coord.bankgroup, c.coord.bank)
}

/// Every violated constraint in `log`. `mode_of(cmd)` supplies the row mode
/// the device actually has for an ACT target.
pub fn check_log(
    log: &[DramCommand],
    topo: &DramTopology,
    t: &OracleTimings,
    mode_of: &dyn Fn(&DramCommand) -> RowMode,
) -> Vec<Violation> {
    let span = t.span();
    let mut out = Vec::new();
    // Mode in effect for each command: ACT row mode, then the opened row's
    // mode for PRE/RD/WR, the pool mode for REF.
    let mut eff: Vec<RowMode> = Vec::with_capacity(log.len());
    let mut open: HashMap<BankKey, (u32, RowMode)> = HashMap::new();
    let mut per_cycle: HashMap<(u64, u32), usize> = HashMap::new();
    let mut lo = 0usize;
    for (i, c) in log.iter().enumerate() {
        let mut bad = |rule: String| {
            out.push(Violation {
                index: i,
                cycle: c.issue_cycle,
                kind: c.kind,
                rule,
            })
        };
        if i > 0 && c.issue_cycle < log[i - 1].issue_cycle {
            bad("log out of order".into());
        }
        let slot = per_cycle.entry((c.issue_cycle, c.coord.channel)).or_insert(0);
        *slot += 1;
        if *slot > 1 {
            bad("two commands on one command bus cycle".into());
        }
        if c.kind != CommandKind::Ref
            && ((c.coord.bankgroup as u64) >= topo.bankgroups_per_rank
                || (c.coord.bank as u64) >= topo.banks_per_bankgroup
                || (c.coord.row as u64) >= topo.rows_per_bank()
                || (c.coord.column as u64) >= topo.columns_per_row)
        {
            bad("coordinate out of range".into());
        }
        let key = bank_key(c);
        let mode = match c.kind {
            CommandKind::Act => {
                let m = mode_of(c);
                if m != c.mode {
                    bad(format!("ACT logged as {:?} but row is {:?}", c.mode, m));
                }
                if open.contains_key(&key) {
                    bad("ACT to open bank".into());
                }
                open.insert(key, (c.coord.row, m));
                m
            }
            CommandKind::Pre => match open.remove(&key) {
                Some((_, m)) => m,
                None => {
                    bad("PRE to closed bank".into());
                    c.mode
                }
            },
            CommandKind::Rd | CommandKind::Wr => match open.get(&key) {
                Some(&(row, m)) if row == c.coord.row => m,
                Some(_) => {
                    bad("column command to wrong row".into());
                    c.mode
                }
                None => {
                    bad("column command to closed bank".into());
                    c.mode
                }
            },
            CommandKind::Ref => {
                if open.keys().any(|k| k.0 == c.coord.channel && k.1 == c.coord.rank) {
                    bad("REF with open bank".into());
                }
                c.mode
            }
        };
        eff.push(mode);

        while c.issue_cycle - log[lo].issue_cycle >= span {
            lo += 1;
        }
        let mut recent_acts = 0;
        for j in lo..i {
            let p = &log[j];
            if p.coord.channel != c.coord.channel {
                continue;
            }
            let gap = c.issue_cycle - p.issue_cycle;
            let same_rank = p.coord.rank == c.coord.rank;
            let same_bg = same_rank && p.coord.bankgroup == c.coord.bankgroup;
            let same_bank = same_bg && p.coord.bank == c.coord.bank && p.kind != CommandKind::Ref;
            let pm = t.m(eff[j]);
            let mut need = |min: u64, rule: &str| {
                if gap < min {
                    out.push(Violation {
                        index: i,
                        cycle: c.issue_cycle,
                        kind: c.kind,
                        rule: format!("{rule}: {gap} < {min} after {:?}@{}", p.kind, p.issue_cycle),
                    });
                }
            };
            use CommandKind::*;
            if same_rank && p.kind == Ref {
                need(pm.rfc, "tRFC");
            }
            match (p.kind, c.kind) {
                (Act, Act) if same_bank => need(pm.ras + pm.rp, "tRC"),
                (Act, Act) if same_bg => need(t.rrd_l, "tRRD_L"),
                (Act, Act) if same_rank => need(t.rrd_s, "tRRD_S"),
                (Pre, Act) if same_bank => need(pm.rp, "tRP"),
                (Act, Pre) if same_bank => need(pm.ras, "tRAS"),
                (Act, Rd | Wr) if same_bank => need(pm.rcd, "tRCD"),
                (Rd, Pre) if same_bank => need(t.rtp, "tRTP"),
                (Wr, Pre) if same_bank => need(t.cwl + t.bl + pm.wr, "tWR"),
                (Rd, Rd) if same_bg => need(t.ccd_l, "tCCD_L"),
                (Rd, Rd) => need(t.ccd_s, "tCCD_S"),
                (Wr, Wr) if same_bg => need(t.ccd_l, "tCCD_L"),
                (Wr, Wr) => need(t.ccd_s, "tCCD_S"),
                (Wr, Rd) if same_bg => need(t.cwl + t.bl + t.wtr_l, "tWTR_L"),
                (Wr, Rd) if same_rank => need(t.cwl + t.bl + t.wtr_s, "tWTR_S"),
                (Wr, Rd) => need(t.cwl + t.bl, "write data burst"),
                (Rd, Wr) => need((t.cl + t.bl + 2).saturating_sub(t.cwl), "read-to-write turnaround"),
                (Pre, Ref) if same_rank => need(pm.rp, "tRP before REF"),
                (Act, Ref) if same_rank => need(pm.ras + pm.rp, "tRC before REF"),
                _ => {}
            }
            if c.kind == Act && p.kind == Act && same_rank && gap < t.faw {
                recent_acts += 1;
            }
        }
        if recent_acts > 3 {
            out.push(Violation {
                index: i,
                cycle: c.issue_cycle,
                kind: c.kind,
                rule: format!("tFAW: {} earlier ACTs inside the window", recent_acts),
            });
        }
    }
    out
}

/// Per `(channel, rank, mode)` pool: the longest interval any refresh bin went
/// unrefreshed, measured from cycle 0 to `end`. Bins are read from the REF
/// commands' row field.
pub fn refresh_worst_gaps(log: &[DramCommand], bins: u32, end: u64) -> HashMap<(u32, u32, RowMode), u64> {
    let mut last: HashMap<(u32, u32, RowMode), Vec<u64>> = HashMap::new();
    let mut worst: HashMap<(u32, u32, RowMode), u64> = HashMap::new();
    for c in log.iter().filter(|c| c.kind == CommandKind::Ref) {
        let k = (c.coord.channel, c.coord.rank, c.mode);
        let v = last.entry(k).or_insert_with(|| vec![0; bins as usize]);
        let b = c.coord.row as usize;
        let w = worst.entry(k).or_insert(0);
        *w = (*w).max(c.issue_cycle - v[b]);
        v[b] = c.issue_cycle;
    }
    for (k, v) in &last {
        let w = worst.get_mut(k).unwrap();
        for &l in v {
            *w = (*w).max(end - l);
        }
    }
    worst
}
