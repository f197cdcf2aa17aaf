//! Refresh scheduling over per-mode row pools.
//!
//! Each rank keeps one pool per row mode. A pool spreads its rows over
//! [`REFRESH_BINS`] bins; bin `k` first falls due at `(k + 1) * tREFW / 8192`
//! and, once refreshed at cycle `t`, is due again at `t + tREFW`. A bin may be
//! refreshed during the last tREFI before its deadline; passing the deadline
//! without a refresh is a fault.

use thiserror::Error;

use crate::dram::{Cycle, RowMode, REFRESH_BINS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RefreshError {
    #[error("refresh deadline missed: {mode:?} pool bin {bin} due at {deadline}, now {now}")]
    DeadlineMissed {
        mode: RowMode,
        bin: u32,
        deadline: Cycle,
        now: Cycle,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefreshBin {
    /// Bin slot in `0..REFRESH_BINS`.
    pub slot: u32,
    /// Range of indices into the pool's row list.
    pub rows: std::ops::Range<usize>,
    pub deadline: Cycle,
    pub last_refresh: Option<Cycle>,
    pub refreshes: u64,
    /// Longest observed interval between refreshes, counting from cycle 0.
    pub max_gap: Cycle,
}

#[derive(Debug, Clone)]
pub struct RefreshPool {
    mode: RowMode,
    refw: Cycle,
    refi: Cycle,
    rfc: Cycle,
    rows: Vec<u32>,
    bins: Vec<RefreshBin>,
    next: usize,
}

impl RefreshPool {
    /// `rows` are rank-local row ids in ascending order.
    pub fn new(mode: RowMode, refw: Cycle, refi: Cycle, rfc: Cycle, rows: Vec<u32>) -> Self {
        let n = rows.len();
        let bins = (0..REFRESH_BINS)
            .filter_map(|k| {
                let lo = (k as usize * n) / REFRESH_BINS as usize;
                let hi = ((k as usize + 1) * n) / REFRESH_BINS as usize;
                (hi > lo).then(|| RefreshBin {
                    slot: k as u32,
                    rows: lo..hi,
                    deadline: (k + 1) * refw / REFRESH_BINS,
                    last_refresh: None,
                    refreshes: 0,
                    max_gap: 0,
                })
            })
            .collect();
        Self {
            mode,
            refw,
            refi,
            rfc,
            rows,
            bins,
            next: 0,
        }
    }

    pub fn mode(&self) -> RowMode {
        self.mode
    }

    pub fn refw(&self) -> Cycle {
        self.refw
    }

    pub fn refi(&self) -> Cycle {
        self.refi
    }

    pub fn rfc(&self) -> Cycle {
        self.rfc
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn bins(&self) -> &[RefreshBin] {
        &self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Next bin to refresh.
    pub fn next_bin(&self) -> Option<&RefreshBin> {
        self.bins.get(self.next)
    }

    /// First cycle at which the next bin may be refreshed.
    pub fn next_eligible(&self) -> Option<Cycle> {
        self.next_bin().map(|b| b.deadline.saturating_sub(self.refi))
    }

    /// Whether the next bin is inside its refresh window at `now`.
    pub fn is_due(&self, now: Cycle) -> Result<bool, RefreshError> {
        let Some(bin) = self.next_bin() else {
            return Ok(false);
        };
        if now > bin.deadline {
            return Err(RefreshError::DeadlineMissed {
                mode: self.mode,
                bin: bin.slot,
                deadline: bin.deadline,
                now,
            });
        }
        Ok(now + self.refi >= bin.deadline)
    }

    /// Records a refresh of the next bin at `now`; returns the bin slot.
    pub fn record(&mut self, now: Cycle) -> u32 {
        let refw = self.refw;
        let bin = &mut self.bins[self.next];
        let gap = now - bin.last_refresh.unwrap_or(0);
        bin.max_gap = bin.max_gap.max(gap);
        bin.last_refresh = Some(now);
        bin.refreshes += 1;
        bin.deadline = now + refw;
        let slot = bin.slot;
        self.next = (self.next + 1) % self.bins.len();
        slot
    }

    /// Longest interval any row has gone without refresh, including the
    /// still-open interval up to `now`.
    pub fn worst_gap(&self, now: Cycle) -> Cycle {
        self.bins
            .iter()
            .map(|b| b.max_gap.max(now - b.last_refresh.unwrap_or(0)))
            .max()
            .unwrap_or(0)
    }
}

/// Per-rank refresh state over its mode pools.
#[derive(Debug, Clone)]
pub struct RefreshScheduler {
    pools: Vec<RefreshPool>,
}

impl RefreshScheduler {
    pub fn new(pools: Vec<RefreshPool>) -> Self {
        Self { pools }
    }

    pub fn pools(&self) -> &[RefreshPool] {
        &self.pools
    }

    /// Index of the pool that needs a refresh now, preferring the earliest
    /// deadline. Fails if any pool has already missed a deadline.
    pub fn due(&self, now: Cycle) -> Result<Option<usize>, RefreshError> {
        let mut best: Option<(Cycle, usize)> = None;
        for (i, p) in self.pools.iter().enumerate() {
            if p.is_due(now)? {
                let d = p.next_bin().map(|b| b.deadline).unwrap_or(Cycle::MAX);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
        }
        Ok(best.map(|(_, i)| i))
    }

    pub fn record(&mut self, pool: usize, now: Cycle) -> u32 {
        self.pools[pool].record(now)
    }

    pub fn next_eligible(&self) -> Option<Cycle> {
        self.pools.iter().filter_map(RefreshPool::next_eligible).min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_pool_never_refreshes() {
        let p = RefreshPool::new(RowMode::MaxCapacity, 1000, 10, 5, vec![]);
        assert!(p.is_empty());
        assert_eq!(p.is_due(1_000_000), Ok(false));
        let s = RefreshScheduler::new(vec![p.clone(), p]);
        assert_eq!(s.due(123_456_789), Ok(None));
        assert_eq!(s.next_eligible(), None);
    }

    #[test]
    fn bins_partition_rows() {
        let rows: Vec<u32> = (0..20_000).collect();
        let p = RefreshPool::new(RowMode::HighPerformance, 8192 * 100, 100, 5, rows);
        let mut covered = 0;
        let mut expect_lo = 0;
        for b in p.bins() {
            assert_eq!(b.rows.start, expect_lo);
            expect_lo = b.rows.end;
            covered += b.rows.len();
        }
        assert_eq!(covered, 20_000);
        assert_eq!(p.bins().len(), 8192);
    }

    #[test]
    fn inter_refresh_spacing_64ms() {
        // 64 ms at 1200 MHz with tREFI = 9375 cycles (7.8125 us).
        let refw = 76_800_000;
        let mut p = RefreshPool::new(RowMode::MaxCapacity, refw, 9375, 420, (0..8192 * 4).collect());
        let mut issued = vec![];
        let mut now = 0;
        while issued.len() < 20 {
            if p.is_due(now).unwrap() {
                p.record(now);
                issued.push(now);
            }
            now += 1;
        }
        for w in issued.windows(2) {
            assert_eq!(w[1] - w[0], 9375);
        }
    }

    #[test]
    fn missed_deadline_is_fault() {
        let p = RefreshPool::new(RowMode::MaxCapacity, 8192 * 10, 10, 5, (0..8192).collect());
        assert!(matches!(p.is_due(11), Err(RefreshError::DeadlineMissed { bin: 0, .. })));
    }

    #[test]
    fn refresh_rate_scales_with_window() {
        let count = |refw: Cycle, refi: Cycle| {
            let mut p = RefreshPool::new(RowMode::HighPerformance, refw, refi, 5, (0..8192).collect());
            let mut n = 0u64;
            for now in 0..8192 * 194 * 2 {
                if p.is_due(now).unwrap() {
                    p.record(now);
                    n += 1;
                }
            }
            n
        };
        let base = count(8192 * 64, 64);
        let long = count(8192 * 194, 194);
        let expected = base as f64 * 64.0 / 194.0;
        assert!((long as f64 - expected).abs() <= 1.0 + expected * 0.01, "{base} {long}");
    }
}
