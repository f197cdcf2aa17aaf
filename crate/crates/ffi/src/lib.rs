//! C ABI over the simulator.
//!
//! Handles are opaque pointers created by `*_new`/`*_load`-style functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`ClrStatus`]; on failure the message is available from
//! [`clr_last_error`]. Strings returned by the library are owned by the caller
//! and released with [`clr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use clr_sim::address::{AddressMap, DramCoord};
use clr_sim::clr::{iso_signals, SubarrayParity};
use clr_sim::dram::{timing_for, CommandKind, RowMode, TimingParams};
use clr_sim::output::write_outputs;
use clr_sim::sim::{load_traces, run_with_speedup, RunOutput};
use clr_sim::stats::write_stats_csv;
use clr_sim::SimConfig;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Simulation = 4,
    Io = 5,
    OutOfRange = 6,
    Unavailable = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClrRowMode {
    MaxCapacity = 0,
    HighPerformance = 1,
}

impl From<ClrRowMode> for RowMode {
    fn from(m: ClrRowMode) -> Self {
        match m {
            ClrRowMode::MaxCapacity => RowMode::MaxCapacity,
            ClrRowMode::HighPerformance => RowMode::HighPerformance,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClrCommandKind {
    Act = 0,
    Pre = 1,
    Rd = 2,
    Wr = 3,
    Ref = 4,
}

/// Array timings of one row mode, nanoseconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClrTiming {
    pub t_rcd: f64,
    pub t_ras: f64,
    pub t_rp: f64,
    pub t_wr: f64,
    pub t_rfc: f64,
    pub t_refw_ms: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClrCoord {
    pub channel: u32,
    pub rank: u32,
    pub bankgroup: u32,
    pub bank: u32,
    pub row: u32,
    pub column: u32,
    pub byte: u32,
}

impl From<DramCoord> for ClrCoord {
    fn from(c: DramCoord) -> Self {
        Self {
            channel: c.channel,
            rank: c.rank,
            bankgroup: c.bankgroup,
            bank: c.bank,
            row: c.row,
            column: c.column,
            byte: c.byte,
        }
    }
}

impl From<ClrCoord> for DramCoord {
    fn from(c: ClrCoord) -> Self {
        Self {
            channel: c.channel,
            rank: c.rank,
            bankgroup: c.bankgroup,
            bank: c.bank,
            row: c.row,
            column: c.column,
            byte: c.byte,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClrIso {
    pub iso1: bool,
    pub iso2: bool,
}

/// Energy breakdown in joules; `elapsed_s` is simulated time.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClrEnergy {
    pub act_pre: f64,
    pub read: f64,
    pub write: f64,
    pub refresh: f64,
    pub background: f64,
    pub total: f64,
    pub elapsed_s: f64,
}

/// Opaque simulator configuration.
pub struct ClrConfig(SimConfig);

/// Opaque result of one run.
pub struct ClrReport {
    run: RunOutput,
    config: SimConfig,
}

/// Opaque physical address map.
pub struct ClrAddressMap(AddressMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn fail(status: ClrStatus, msg: impl Into<String>) -> ClrStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> ClrStatus) -> ClrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ClrStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, ClrStatus> {
    if p.is_null() {
        return Err(fail(ClrStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ClrStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! deref {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(ClrStatus::NullPointer, "null handle"),
        }
    };
}

macro_rules! out {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(ClrStatus::NullPointer, "null output pointer"),
        }
    };
}

/// Message of the last failed call on this thread, or NULL. Caller frees it
/// with `clr_string_free`.
#[no_mangle]
pub extern "C" fn clr_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn clr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn clr_config_default() -> *mut ClrConfig {
    Box::into_raw(Box::new(ClrConfig(SimConfig::default())))
}

/// Parses INI text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_config_from_str(text: *const c_char, out: *mut *mut ClrConfig) -> ClrStatus {
    guard(|| {
        let out = out!(out);
        let text = try_ffi!(str_arg(text));
        match SimConfig::from_ini_str(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(ClrConfig(c)));
                ClrStatus::Ok
            }
            Err(e) => fail(ClrStatus::Config, e.to_string()),
        }
    })
}

/// Loads an INI file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_config_load(path: *const c_char, out: *mut *mut ClrConfig) -> ClrStatus {
    guard(|| {
        let out = out!(out);
        let path = try_ffi!(str_arg(path));
        match SimConfig::load(Path::new(path)) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(ClrConfig(c)));
                ClrStatus::Ok
            }
            Err(e) => fail(ClrStatus::Config, e.to_string()),
        }
    })
}

/// Sets `[section] key = value` and revalidates; the configuration is left
/// unchanged on failure.
///
/// # Safety
/// `cfg` must be a live handle; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn clr_config_set(
    cfg: *mut ClrConfig,
    section: *const c_char,
    key: *const c_char,
    value: *const c_char,
) -> ClrStatus {
    guard(|| {
        let cfg = out!(cfg);
        let (section, key, value) = (try_ffi!(str_arg(section)), try_ffi!(str_arg(key)), try_ffi!(str_arg(value)));
        let mut next = cfg.0.clone();
        match next.set(section, key, value).and_then(|_| next.validate()) {
            Ok(()) => {
                cfg.0 = next;
                ClrStatus::Ok
            }
            Err(e) => fail(ClrStatus::Config, e.to_string()),
        }
    })
}

/// Reloadable INI text of the configuration; NULL on a null handle.
///
/// # Safety
/// `cfg` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clr_config_echo(cfg: *const ClrConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => into_c_string(c.0.echo()),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn clr_config_free(cfg: *mut ClrConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configuration: the configured traces, or one synthetic trace per
/// core when none are set.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_run(cfg: *const ClrConfig, out: *mut *mut ClrReport) -> ClrStatus {
    guard(|| {
        let cfg = deref!(cfg);
        let out = out!(out);
        let result = load_traces(&cfg.0).and_then(|t| run_with_speedup(&cfg.0, &t, "ffi"));
        match result {
            Ok(run) => {
                *out = Box::into_raw(Box::new(ClrReport {
                    run,
                    config: cfg.0.clone(),
                }));
                ClrStatus::Ok
            }
            Err(e) => fail(ClrStatus::Simulation, e.to_string()),
        }
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn clr_report_free(report: *mut ClrReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clr_report_core_count(report: *const ClrReport) -> usize {
    report.as_ref().map_or(0, |r| r.run.report.ipc.len())
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_report_ipc(report: *const ClrReport, core: usize, out: *mut f64) -> ClrStatus {
    let r = deref!(report);
    let out = out!(out);
    match r.run.report.ipc.get(core) {
        Some(v) => {
            *out = *v;
            ClrStatus::Ok
        }
        None => fail(ClrStatus::OutOfRange, format!("core {core} out of range")),
    }
}

/// Sum of per-core IPC; NaN on a null handle.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clr_report_ipc_total(report: *const ClrReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.run.report.ipc_total())
}

/// Weighted speedup; `CLR_STATUS_UNAVAILABLE` for single-core runs.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_report_weighted_speedup(report: *const ClrReport, out: *mut f64) -> ClrStatus {
    let r = deref!(report);
    let out = out!(out);
    match r.run.report.weighted_speedup {
        Some(w) => {
            *out = w;
            ClrStatus::Ok
        }
        None => fail(ClrStatus::Unavailable, "weighted speedup needs more than one core"),
    }
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clr_report_row_hit_rate(report: *const ClrReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.run.report.row_hit_rate())
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clr_report_capacity_percent(report: *const ClrReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.run.report.capacity_percent)
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clr_report_command_count(report: *const ClrReport, kind: ClrCommandKind) -> u64 {
    let kind = match kind {
        ClrCommandKind::Act => CommandKind::Act,
        ClrCommandKind::Pre => CommandKind::Pre,
        ClrCommandKind::Rd => CommandKind::Rd,
        ClrCommandKind::Wr => CommandKind::Wr,
        ClrCommandKind::Ref => CommandKind::Ref,
    };
    report.as_ref().map_or(0, |r| r.run.report.command_count(kind))
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_report_energy(report: *const ClrReport, out: *mut ClrEnergy) -> ClrStatus {
    let r = deref!(report);
    let out = out!(out);
    let e = &r.run.report.energy;
    *out = ClrEnergy {
        act_pre: e.act_pre,
        read: e.read,
        write: e.write,
        refresh: e.refresh,
        background: e.background,
        total: e.total(),
        elapsed_s: e.elapsed,
    };
    ClrStatus::Ok
}

/// The run's `stats.csv` text; NULL on a null handle.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clr_report_stats_csv(report: *const ClrReport) -> *mut c_char {
    let Some(r) = report.as_ref() else {
        return ptr::null_mut();
    };
    let mut buf = Vec::new();
    match write_stats_csv(&mut buf, std::slice::from_ref(&r.run.report)) {
        Ok(()) => into_c_string(String::from_utf8_lossy(&buf).into_owned()),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Writes the run's output files into `dir`.
///
/// # Safety
/// `report` must be a live handle; `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn clr_report_write(report: *const ClrReport, dir: *const c_char) -> ClrStatus {
    guard(|| {
        let r = deref!(report);
        let dir = try_ffi!(str_arg(dir));
        match write_outputs(Path::new(dir), &r.config, std::slice::from_ref(&r.run)) {
            Ok(()) => ClrStatus::Ok,
            Err(e) => fail(ClrStatus::Io, e.to_string()),
        }
    })
}

/// Array timings of `mode` on the default DDR4 baseline.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_timing_for(
    mode: ClrRowMode,
    early_termination: bool,
    t_refw_ms: f64,
    out: *mut ClrTiming,
) -> ClrStatus {
    let out = out!(out);
    match timing_for(mode.into(), early_termination, t_refw_ms, &TimingParams::ddr4_baseline()) {
        Ok(t) => {
            *out = ClrTiming {
                t_rcd: t.t_rcd,
                t_ras: t.t_ras,
                t_rp: t.t_rp,
                t_wr: t.t_wr,
                t_rfc: t.t_rfc,
                t_refw_ms: t.t_refw_ms,
            };
            ClrStatus::Ok
        }
        Err(e) => fail(ClrStatus::OutOfRange, e.to_string()),
    }
}

/// ISO1/ISO2 levels to activate a row of `subarray` in `mode`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_iso_signals(subarray: u64, mode: ClrRowMode, out: *mut ClrIso) -> ClrStatus {
    let out = out!(out);
    let a = iso_signals(SubarrayParity::of(subarray), mode.into());
    *out = ClrIso {
        iso1: a.iso1,
        iso2: a.iso2,
    };
    ClrStatus::Ok
}

/// Address map of the configuration's topology, spec string and page size.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_address_map_from_config(
    cfg: *const ClrConfig,
    out: *mut *mut ClrAddressMap,
) -> ClrStatus {
    let cfg = deref!(cfg);
    let out = out!(out);
    match cfg.0.address_map() {
        Ok(m) => {
            *out = Box::into_raw(Box::new(ClrAddressMap(m)));
            ClrStatus::Ok
        }
        Err(e) => fail(ClrStatus::Config, e.to_string()),
    }
}

/// # Safety
/// `map` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_address_map_decode(map: *const ClrAddressMap, addr: u64, out: *mut ClrCoord) -> ClrStatus {
    let map = deref!(map);
    let out = out!(out);
    match map.0.decode(addr) {
        Ok(c) => {
            *out = c.into();
            ClrStatus::Ok
        }
        Err(e) => fail(ClrStatus::OutOfRange, e.to_string()),
    }
}

/// # Safety
/// `map` and `coord` must be valid; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn clr_address_map_encode(
    map: *const ClrAddressMap,
    coord: *const ClrCoord,
    out: *mut u64,
) -> ClrStatus {
    let map = deref!(map);
    let coord = deref!(coord);
    let out = out!(out);
    match map.0.encode(&(*coord).into()) {
        Ok(a) => {
            *out = a;
            ClrStatus::Ok
        }
        Err(e) => fail(ClrStatus::OutOfRange, e.to_string()),
    }
}

/// # Safety
/// `map` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn clr_address_map_free(map: *mut ClrAddressMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}
