//! DRAM timing parameters and their per-mode variants.
//!
//! Values are kept in nanoseconds (refresh window in milliseconds, refresh
//! interval in microseconds) and converted to controller cycles with a
//! ceiling so that a converted constraint is never shorter than the analog one.

use thiserror::Error;

/// Refresh bins per refresh window (tREFI = tREFW / 8192).
pub const REFRESH_BINS: u64 = 8192;

/// Refresh window every device supports.
pub const BASE_REFW_MS: f64 = 64.0;
/// Longest refresh window supported by high-performance rows.
pub const MAX_REFW_MS: f64 = 194.0;
/// tRCD growth of high-performance rows between the 64 ms and 194 ms windows.
pub const TRCD_GROWTH_AT_MAX_REFW_NS: f64 = 3.24;
/// tRAS growth of high-performance rows between the 64 ms and 194 ms windows.
pub const TRAS_GROWTH_AT_MAX_REFW_NS: f64 = 3.04;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("refresh window {0} ms outside the supported range [64, 194] ms")]
    RefreshWindowOutOfRange(f64),
    #[error("timing parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("tRAS ({t_ras} ns) must not be shorter than tRCD ({t_rcd} ns)")]
    RasShorterThanRcd { t_ras: f64, t_rcd: f64 },
}

/// Operating mode of a DRAM row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum RowMode {
    /// Full density; behaves like a conventional row.
    #[default]
    MaxCapacity,
    /// Adjacent cells and sense amplifiers coupled; half density, lower latency.
    HighPerformance,
}

impl RowMode {
    pub const ALL: [RowMode; 2] = [RowMode::MaxCapacity, RowMode::HighPerformance];

    pub fn index(self) -> usize {
        match self {
            RowMode::MaxCapacity => 0,
            RowMode::HighPerformance => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RowMode::MaxCapacity => "max_capacity",
            RowMode::HighPerformance => "high_performance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max_capacity" | "mc" | "MaxCapacity" => Some(RowMode::MaxCapacity),
            "high_performance" | "hp" | "HighPerformance" => Some(RowMode::HighPerformance),
            _ => None,
        }
    }
}

/// Complete set of timing constraints for one row mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingParams {
    pub t_rcd: f64,
    pub t_ras: f64,
    pub t_rp: f64,
    pub t_wr: f64,
    pub t_rfc: f64,
    pub t_rrd_s: f64,
    pub t_rrd_l: f64,
    pub t_faw: f64,
    pub t_ccd_s: f64,
    pub t_ccd_l: f64,
    pub t_rtp: f64,
    pub t_wtr_s: f64,
    pub t_wtr_l: f64,
    pub cl: f64,
    pub cwl: f64,
    pub t_bl: f64,
    pub t_refw_ms: f64,
    pub t_refi_us: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self::ddr4_baseline()
    }
}

impl TimingParams {
    /// DDR4-2400 16 Gb x8 baseline. Array timings come from circuit-level
    /// characterization; the rest follow the speed bin.
    pub fn ddr4_baseline() -> Self {
        Self {
            t_rcd: 13.8,
            t_ras: 39.4,
            t_rp: 15.5,
            t_wr: 12.5,
            t_rfc: 350.0,
            t_rrd_s: 3.3,
            t_rrd_l: 4.9,
            t_faw: 21.0,
            t_ccd_s: 3.333,
            t_ccd_l: 5.0,
            t_rtp: 7.5,
            t_wtr_s: 2.5,
            t_wtr_l: 7.5,
            cl: 13.32,
            cwl: 10.0,
            t_bl: 3.333,
            t_refw_ms: BASE_REFW_MS,
            t_refi_us: BASE_REFW_MS * 1000.0 / REFRESH_BINS as f64,
        }
    }

    /// Row cycle time, tRAS + tRP.
    pub fn t_rc(&self) -> f64 {
        self.t_ras + self.t_rp
    }

    pub fn named_values(&self) -> [(&'static str, f64); 18] {
        [
            ("tRCD", self.t_rcd),
            ("tRAS", self.t_ras),
            ("tRP", self.t_rp),
            ("tWR", self.t_wr),
            ("tRFC", self.t_rfc),
            ("tRRD_S", self.t_rrd_s),
            ("tRRD_L", self.t_rrd_l),
            ("tFAW", self.t_faw),
            ("tCCD_S", self.t_ccd_s),
            ("tCCD_L", self.t_ccd_l),
            ("tRTP", self.t_rtp),
            ("tWTR_S", self.t_wtr_s),
            ("tWTR_L", self.t_wtr_l),
            ("CL", self.cl),
            ("CWL", self.cwl),
            ("tBL", self.t_bl),
            ("tREFW", self.t_refw_ms),
            ("tREFI", self.t_refi_us),
        ]
    }

    /// Mutable access by the conventional parameter name, used by configuration overrides.
    pub fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "tRCD" => &mut self.t_rcd,
            "tRAS" => &mut self.t_ras,
            "tRP" => &mut self.t_rp,
            "tWR" => &mut self.t_wr,
            "tRFC" => &mut self.t_rfc,
            "tRRD_S" => &mut self.t_rrd_s,
            "tRRD_L" => &mut self.t_rrd_l,
            "tFAW" => &mut self.t_faw,
            "tCCD_S" => &mut self.t_ccd_s,
            "tCCD_L" => &mut self.t_ccd_l,
            "tRTP" => &mut self.t_rtp,
            "tWTR_S" => &mut self.t_wtr_s,
            "tWTR_L" => &mut self.t_wtr_l,
            "CL" => &mut self.cl,
            "CWL" => &mut self.cwl,
            "tBL" => &mut self.t_bl,
            "tREFW" => &mut self.t_refw_ms,
            "tREFI" => &mut self.t_refi_us,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        for (name, value) in self.named_values() {
            if !(value > 0.0) {
                return Err(TimingError::NonPositive { name, value });
            }
        }
        if self.t_ras < self.t_rcd {
            return Err(TimingError::RasShorterThanRcd {
                t_ras: self.t_ras,
                t_rcd: self.t_rcd,
            });
        }
        Ok(())
    }

    pub fn to_cycles(&self, tck_ns: f64) -> CycleTimings {
        let c = |ns: f64| ns_to_cycles(ns, tck_ns);
        let cl = c(self.cl);
        let cwl = c(self.cwl);
        let bl = c(self.t_bl);
        CycleTimings {
            rcd: c(self.t_rcd),
            ras: c(self.t_ras),
            rp: c(self.t_rp),
            wr: c(self.t_wr),
            rfc: c(self.t_rfc),
            rrd_s: c(self.t_rrd_s),
            rrd_l: c(self.t_rrd_l),
            faw: c(self.t_faw),
            ccd_s: c(self.t_ccd_s),
            ccd_l: c(self.t_ccd_l),
            rtp: c(self.t_rtp),
            wtr_s: c(self.t_wtr_s),
            wtr_l: c(self.t_wtr_l),
            cl,
            cwl,
            bl,
            refw: c(self.t_refw_ms * 1.0e6),
            refi: c(self.t_refi_us * 1.0e3),
            // Two cycles of bus turnaround between read data and write data.
            rd_to_wr: (cl + bl + 2).saturating_sub(cwl).max(1),
        }
    }
}

/// Converts nanoseconds to cycles, rounding up. A tiny slack absorbs binary
/// floating-point error so that exact multiples of the clock are not bumped.
pub fn ns_to_cycles(ns: f64, tck_ns: f64) -> u64 {
    let raw = ns / tck_ns;
    let cycles = (raw - 1.0e-9).ceil();
    if cycles < 0.0 {
        0
    } else {
        cycles as u64
    }
}

/// Timing constraints converted to integer controller cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleTimings {
    pub rcd: u64,
    pub ras: u64,
    pub rp: u64,
    pub wr: u64,
    pub rfc: u64,
    pub rrd_s: u64,
    pub rrd_l: u64,
    pub faw: u64,
    pub ccd_s: u64,
    pub ccd_l: u64,
    pub rtp: u64,
    pub wtr_s: u64,
    pub wtr_l: u64,
    pub cl: u64,
    pub cwl: u64,
    pub bl: u64,
    pub refw: u64,
    pub refi: u64,
    pub rd_to_wr: u64,
}

impl CycleTimings {
    pub fn rc(&self) -> u64 {
        self.ras + self.rp
    }

    /// WR issue to PRE of the same bank: write latency, burst, then write recovery.
    pub fn wr_to_pre(&self) -> u64 {
        self.cwl + self.bl + self.wr
    }

    pub fn wr_to_rd(&self, same_bankgroup: bool) -> u64 {
        self.cwl + self.bl + if same_bankgroup { self.wtr_l } else { self.wtr_s }
    }

    pub fn read_latency(&self) -> u64 {
        self.cl + self.bl
    }

    pub fn write_latency(&self) -> u64 {
        self.cwl + self.bl
    }
}

/// The four array-access timings that differ between row modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTimings {
    pub t_rcd: f64,
    pub t_ras: f64,
    pub t_rp: f64,
    pub t_wr: f64,
}

/// Array-access timings of each row configuration at the 64 ms refresh window.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTimingTable {
    pub max_capacity: CellTimings,
    pub high_performance: CellTimings,
    pub high_performance_early_term: CellTimings,
}

impl Default for ModeTimingTable {
    fn default() -> Self {
        Self {
            max_capacity: CellTimings {
                t_rcd: 13.2,
                t_ras: 40.3,
                t_rp: 8.3,
                t_wr: 13.3,
            },
            high_performance: CellTimings {
                t_rcd: 5.4,
                t_ras: 20.3,
                t_rp: 8.3,
                t_wr: 12.5,
            },
            high_performance_early_term: CellTimings {
                t_rcd: 5.5,
                t_ras: 14.1,
                t_rp: 8.3,
                t_wr: 8.1,
            },
        }
    }
}

impl ModeTimingTable {
    /// tRFC scaling for high-performance rows: one minus the mean of the
    /// relative tRAS and tRP reductions (early-termination column) against `base`.
    pub fn hp_refresh_factor(&self, base: &TimingParams) -> f64 {
        let hp = &self.high_performance_early_term;
        let ras_cut = (base.t_ras - hp.t_ras) / base.t_ras;
        let rp_cut = (base.t_rp - hp.t_rp) / base.t_rp;
        1.0 - (ras_cut + rp_cut) / 2.0
    }
}

/// Whether a high-performance refresh window lies strictly between the two
/// characterized anchor points, so its tRCD/tRAS are interpolated.
pub fn refw_is_interpolated(t_refw_ms: f64) -> bool {
    t_refw_ms > BASE_REFW_MS && t_refw_ms < MAX_REFW_MS
}

/// Timing parameters for `mode` with the default per-mode table.
pub fn timing_for(
    mode: RowMode,
    early_termination: bool,
    t_refw_ms: f64,
    base: &TimingParams,
) -> Result<TimingParams, TimingError> {
    timing_for_table(&ModeTimingTable::default(), mode, early_termination, t_refw_ms, base)
}

/// Timing parameters for `mode` built on `base`.
///
/// Max-capacity rows always refresh at the 64 ms window; `t_refw_ms` only
/// affects high-performance rows, whose tRCD and tRAS grow linearly from the
/// 64 ms anchor to the 194 ms anchor. Secondary DDR4 timings are taken from
/// `base` unchanged.
pub fn timing_for_table(
    table: &ModeTimingTable,
    mode: RowMode,
    early_termination: bool,
    t_refw_ms: f64,
    base: &TimingParams,
) -> Result<TimingParams, TimingError> {
    if !(BASE_REFW_MS..=MAX_REFW_MS).contains(&t_refw_ms) {
        return Err(TimingError::RefreshWindowOutOfRange(t_refw_ms));
    }
    let mut out = base.clone();
    match mode {
        RowMode::MaxCapacity => {
            let cells = &table.max_capacity;
            out.t_rcd = cells.t_rcd;
            out.t_ras = cells.t_ras;
            out.t_rp = cells.t_rp;
            out.t_wr = cells.t_wr;
            out.t_refw_ms = BASE_REFW_MS;
        }
        RowMode::HighPerformance => {
            let cells = if early_termination {
                &table.high_performance_early_term
            } else {
                &table.high_performance
            };
            let stretch = (t_refw_ms - BASE_REFW_MS) / (MAX_REFW_MS - BASE_REFW_MS);
            out.t_rcd = cells.t_rcd + TRCD_GROWTH_AT_MAX_REFW_NS * stretch;
            out.t_ras = cells.t_ras + TRAS_GROWTH_AT_MAX_REFW_NS * stretch;
            out.t_rp = cells.t_rp;
            out.t_wr = cells.t_wr;
            out.t_rfc = base.t_rfc * table.hp_refresh_factor(base);
            out.t_refw_ms = t_refw_ms;
        }
    }
    out.t_refi_us = out.t_refw_ms * 1000.0 / REFRESH_BINS as f64;
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn max_capacity_row_values() {
        let t = timing_for(RowMode::MaxCapacity, false, 64.0, &TimingParams::default()).unwrap();
        assert_eq!((t.t_rcd, t.t_ras, t.t_rp, t.t_wr), (13.2, 40.3, 8.3, 13.3));
        assert_eq!(t.t_rfc, 350.0);
    }

    #[test]
    fn high_performance_early_termination_values() {
        let t =
            timing_for(RowMode::HighPerformance, true, 64.0, &TimingParams::default()).unwrap();
        assert_eq!((t.t_rcd, t.t_ras, t.t_rp, t.t_wr), (5.5, 14.1, 8.3, 8.1));
        let t =
            timing_for(RowMode::HighPerformance, false, 64.0, &TimingParams::default()).unwrap();
        assert_eq!((t.t_rcd, t.t_ras, t.t_rp, t.t_wr), (5.4, 20.3, 8.3, 12.5));
    }

    #[test]
    fn extended_refresh_window_anchor() {
        let t =
            timing_for(RowMode::HighPerformance, true, 194.0, &TimingParams::default()).unwrap();
        assert!(close(t.t_rcd, 8.74, 1e-9));
        assert!(close(t.t_ras, 17.14, 1e-9));
        assert!(close(t.t_refi_us, 194_000.0 / 8192.0, 1e-9));
    }

    #[test]
    fn hp_refresh_cycle_is_scaled() {
        let base = TimingParams::default();
        for et in [false, true] {
            let t = timing_for(RowMode::HighPerformance, et, 64.0, &base).unwrap();
            let expected = base.t_rfc * (1.0 - (0.642 + 0.464) / 2.0);
            assert!(close(t.t_rfc, expected, 0.001 * base.t_rfc), "{}", t.t_rfc);
        }
    }

    #[test]
    fn out_of_range_window() {
        let base = TimingParams::default();
        for w in [63.9, 194.1, 0.0, 1000.0] {
            assert_eq!(
                timing_for(RowMode::HighPerformance, true, w, &base),
                Err(TimingError::RefreshWindowOutOfRange(w))
            );
        }
    }

    #[test]
    fn cycle_conversion_rounds_up() {
        let tck = 1000.0 / 1200.0;
        assert_eq!(ns_to_cycles(13.8, tck), 17);
        assert_eq!(ns_to_cycles(5.0, tck), 6);
        assert_eq!(ns_to_cycles(10.0, tck), 12);
        let c = TimingParams::default().to_cycles(tck);
        assert_eq!((c.cl, c.cwl, c.bl), (16, 12, 4));
        assert_eq!(c.refi, 9375);
    }

    #[test]
    fn rejects_bad_params() {
        let mut t = TimingParams::default();
        t.t_ras = 10.0;
        assert!(matches!(t.validate(), Err(TimingError::RasShorterThanRcd { .. })));
        let mut t = TimingParams::default();
        *t.field_mut("CL").unwrap() = 0.0;
        assert!(matches!(t.validate(), Err(TimingError::NonPositive { name: "CL", .. })));
    }

    proptest::proptest! {
        #[test]
        fn conversion_is_monotone(a in 0.0f64..1.0e6, b in 0.0f64..1.0e6, mhz in 100u64..4000) {
            let tck = 1000.0 / mhz as f64;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(ns_to_cycles(lo, tck) <= ns_to_cycles(hi, tck));
            proptest::prop_assert!(ns_to_cycles(hi, tck) as f64 * tck >= hi - 1.0e-6);
        }
    }
}
