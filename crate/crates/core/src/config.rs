//! Simulation configuration and its INI representation.
//!
//! ```ini
//! [dram]
//! device = clr            ; clr | ddr4
//! address_map = byte:6, column:7, bankgroup:2, bank:2, rank:0, channel:0, row:*
//!
//! [timing]                ; baseline DDR4 values in ns
//! tRFC = 350
//!
//! [timing.max_capacity]   ; tRCD, tRAS, tRP, tWR of each row configuration
//! [timing.high_performance]
//! [timing.high_performance_no_et]
//!
//! [clr]
//! hp_fraction = 25
//! early_termination = true
//! trefw_ms = 64
//! ```
//!
//! Every key has a default; unknown sections or keys are rejected. Sections
//! `[derived]` and `[metadata]` are written into config echoes and ignored on
//! load.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::address::{AddressError, AddressMap};
use crate::clr::{ClrError, GroupGeometry};
use crate::controller::SchedulerConfig;
use crate::cpu::CoreConfig;
use crate::dram::{
    refw_is_interpolated, timing_for_table, CellTimings, DramTopology, ModeTimingTable, RowMode, TimingError,
    TimingParams, BASE_REFW_MS, MAX_REFW_MS,
};
use crate::energy::{EnergyError, PowerParams};
use crate::workload::{GenParams, TraceKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown config section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("bad value `{value}` for {section}.{key}")]
    BadValue {
        section: String,
        key: String,
        value: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Address(#[from] AddressError),
    #[error(transparent)]
    Clr(#[from] ClrError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Device {
    /// Conventional DDR4: every row uses the baseline timings.
    Ddr4,
    /// Capacity-latency reconfigurable device.
    #[default]
    Clr,
}

impl Device {
    pub fn as_str(self) -> &'static str {
        match self {
            Device::Ddr4 => "ddr4",
            Device::Clr => "clr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: DramTopology,
    pub address_map: String,
    pub page_size: u64,
    pub device: Device,
    pub base: TimingParams,
    pub mode_table: ModeTimingTable,
    pub hp_fraction: f64,
    pub early_termination: bool,
    pub trefw_ms: f64,
    pub scheduler: SchedulerConfig,
    pub core: CoreConfig,
    pub cores: usize,
    pub core_mhz: u64,
    pub llc_bytes: u64,
    pub llc_ways: usize,
    pub power: PowerParams,
    pub seed: u64,
    pub instructions: u64,
    pub warmup: u64,
    pub traces: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub commands_log: bool,
    pub workload: GenParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            topology: DramTopology::default(),
            address_map: AddressMap::DEFAULT_SPEC.to_string(),
            page_size: 4096,
            device: Device::Clr,
            base: TimingParams::ddr4_baseline(),
            mode_table: ModeTimingTable::default(),
            hp_fraction: 0.0,
            early_termination: true,
            trefw_ms: BASE_REFW_MS,
            scheduler: SchedulerConfig::default(),
            core: CoreConfig::default(),
            cores: 1,
            core_mhz: 4000,
            llc_bytes: 8 << 20,
            llc_ways: 8,
            power: PowerParams::default(),
            seed: 1,
            instructions: 1_000_000,
            warmup: 100_000,
            traces: Vec::new(),
            out_dir: None,
            commands_log: false,
            workload: GenParams::default(),
        }
    }
}

fn parse_val<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        section: section.into(),
        key: key.into(),
        value: value.into(),
    })
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            section: section.into(),
            key: key.into(),
            value: value.into(),
        }),
    }
}

fn cells_mut<'a>(cells: &'a mut CellTimings, key: &str) -> Option<&'a mut f64> {
    match key {
        "tRCD" => Some(&mut cells.t_rcd),
        "tRAS" => Some(&mut cells.t_ras),
        "tRP" => Some(&mut cells.t_rp),
        "tWR" => Some(&mut cells.t_wr),
        _ => None,
    }
}

impl SimConfig {
    pub fn from_ini_str(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut cfg = SimConfig::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            if matches!(section, "derived" | "metadata") {
                continue;
            }
            for (key, value) in props.iter() {
                cfg.set(section, key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_ini_str(&text)
    }

    /// Sets one `section.key` value.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let unknown = || ConfigError::UnknownKey {
            section: section.into(),
            key: key.into(),
        };
        let v = value.trim();
        match section {
            "dram" => {
                let t = &mut self.topology;
                match key {
                    "channels" => t.channels = parse_val(section, key, v)?,
                    "ranks" => t.ranks_per_channel = parse_val(section, key, v)?,
                    "bankgroups" => t.bankgroups_per_rank = parse_val(section, key, v)?,
                    "banks_per_group" => t.banks_per_bankgroup = parse_val(section, key, v)?,
                    "subarrays" => t.subarrays_per_bank = parse_val(section, key, v)?,
                    "rows_per_subarray" => t.rows_per_subarray = parse_val(section, key, v)?,
                    "columns" => t.columns_per_row = parse_val(section, key, v)?,
                    "bytes_per_column" => t.bytes_per_column = parse_val(section, key, v)?,
                    "bus_mhz" => t.bus_mhz = parse_val(section, key, v)?,
                    "address_map" => self.address_map = v.to_string(),
                    "page_size" => self.page_size = parse_val(section, key, v)?,
                    "device" => {
                        self.device = match v {
                            "clr" => Device::Clr,
                            "ddr4" | "baseline" => Device::Ddr4,
                            _ => {
                                return Err(ConfigError::BadValue {
                                    section: section.into(),
                                    key: key.into(),
                                    value: v.into(),
                                })
                            }
                        }
                    }
                    _ => return Err(unknown()),
                }
            }
            "timing" => {
                let f = self.base.field_mut(key).ok_or_else(unknown)?;
                *f = parse_val(section, key, v)?;
            }
            "timing.max_capacity" | "timing.high_performance" | "timing.high_performance_no_et" => {
                let cells = match section {
                    "timing.max_capacity" => &mut self.mode_table.max_capacity,
                    "timing.high_performance" => &mut self.mode_table.high_performance_early_term,
                    _ => &mut self.mode_table.high_performance,
                };
                *cells_mut(cells, key).ok_or_else(unknown)? = parse_val(section, key, v)?;
            }
            "clr" => match key {
                "hp_fraction" => self.hp_fraction = parse_val(section, key, v)?,
                "early_termination" => self.early_termination = parse_bool(section, key, v)?,
                "trefw_ms" => self.trefw_ms = parse_val(section, key, v)?,
                _ => return Err(unknown()),
            },
            "controller" => {
                let s = &mut self.scheduler;
                match key {
                    "read_queue" => s.read_queue = parse_val(section, key, v)?,
                    "write_queue" => s.write_queue = parse_val(section, key, v)?,
                    "cap" => s.cap = parse_val(section, key, v)?,
                    "row_timeout_ns" => s.row_timeout_ns = parse_val(section, key, v)?,
                    "write_high" => s.write_high = parse_val(section, key, v)?,
                    "write_low" => s.write_low = parse_val(section, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            "cpu" => match key {
                "cores" => self.cores = parse_val(section, key, v)?,
                "width" => self.core.width = parse_val(section, key, v)?,
                "window" => self.core.window = parse_val(section, key, v)?,
                "mshrs" => self.core.mshrs = parse_val(section, key, v)?,
                "llc_latency" => self.core.llc_latency = parse_val(section, key, v)?,
                "outbox" => self.core.outbox = parse_val(section, key, v)?,
                "llc_bytes" => self.llc_bytes = parse_val(section, key, v)?,
                "llc_ways" => self.llc_ways = parse_val(section, key, v)?,
                "core_mhz" => self.core_mhz = parse_val(section, key, v)?,
                _ => return Err(unknown()),
            },
            "power" => {
                let p = &mut self.power;
                match key {
                    "vdd" => p.vdd = parse_val(section, key, v)?,
                    "idd0" => p.idd0 = parse_val(section, key, v)?,
                    "idd2n" => p.idd2n = parse_val(section, key, v)?,
                    "idd3n" => p.idd3n = parse_val(section, key, v)?,
                    "idd4r" => p.idd4r = parse_val(section, key, v)?,
                    "idd4w" => p.idd4w = parse_val(section, key, v)?,
                    "idd5b" => p.idd5b = parse_val(section, key, v)?,
                    "chips_per_rank" => p.chips_per_rank = parse_val(section, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            "sim" => match key {
                "seed" => self.seed = parse_val(section, key, v)?,
                "instructions" => self.instructions = parse_val(section, key, v)?,
                "warmup" => self.warmup = parse_val(section, key, v)?,
                "traces" => {
                    self.traces = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(PathBuf::from)
                        .collect()
                }
                "out_dir" => self.out_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
                "commands_log" => self.commands_log = parse_bool(section, key, v)?,
                _ => return Err(unknown()),
            },
            "workload" => {
                let w = &mut self.workload;
                match key {
                    "kind" => {
                        w.kind = TraceKind::parse(v).ok_or_else(|| ConfigError::BadValue {
                            section: section.into(),
                            key: key.into(),
                            value: v.into(),
                        })?
                    }
                    "records" => w.records = parse_val(section, key, v)?,
                    "footprint" => w.footprint = parse_val(section, key, v)?,
                    "bubbles_min" => w.bubbles_min = parse_val(section, key, v)?,
                    "bubbles_max" => w.bubbles_max = parse_val(section, key, v)?,
                    "write_fraction" => w.write_fraction = parse_val(section, key, v)?,
                    "zipf_s" => w.zipf_s = parse_val(section, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            other => return Err(ConfigError::UnknownSection(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.topology
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.base.validate()?;
        let map = self.address_map()?;
        if self.device == Device::Clr {
            GroupGeometry::new(&map, &self.topology)?;
        }
        if !(0.0..=100.0).contains(&self.hp_fraction) {
            return Err(ConfigError::Invalid(format!("hp_fraction {} outside [0, 100]", self.hp_fraction)));
        }
        if !(BASE_REFW_MS..=MAX_REFW_MS).contains(&self.trefw_ms) {
            return Err(TimingError::RefreshWindowOutOfRange(self.trefw_ms).into());
        }
        self.mode_timings()?;
        let s = &self.scheduler;
        if s.cap == 0 || !(s.row_timeout_ns > 0.0) || s.read_queue == 0 || s.write_queue == 0 {
            return Err(ConfigError::Invalid("scheduler cap, timeout and queues must be positive".into()));
        }
        if !(0.0 <= s.write_low && s.write_low < s.write_high && s.write_high <= 1.0) {
            return Err(ConfigError::Invalid("write drain thresholds need 0 <= low < high <= 1".into()));
        }
        let c = &self.core;
        if c.width == 0 || c.window == 0 || c.mshrs == 0 || c.outbox == 0 || self.cores == 0 {
            return Err(ConfigError::Invalid("core width, window, MSHRs, outbox and cores must be positive".into()));
        }
        if self.core_mhz == 0 || self.llc_ways == 0 || self.llc_bytes < 64 * self.llc_ways as u64 {
            return Err(ConfigError::Invalid("LLC and core clock must be positive".into()));
        }
        if self.instructions == 0 {
            return Err(ConfigError::Invalid("instruction quota must be positive".into()));
        }
        self.power.validate()?;
        if !self.traces.is_empty() && self.traces.len() != self.cores && self.cores != 1 {
            return Err(ConfigError::Invalid(format!(
                "{} traces given for {} cores",
                self.traces.len(),
                self.cores
            )));
        }
        Ok(())
    }

    pub fn address_map(&self) -> Result<AddressMap, ConfigError> {
        Ok(AddressMap::parse(&self.address_map, &self.topology, self.page_size)?)
    }

    /// Timing sets for max-capacity and high-performance rows. A DDR4 device
    /// uses the baseline for both.
    pub fn mode_timings(&self) -> Result<[TimingParams; 2], ConfigError> {
        Ok(match self.device {
            Device::Ddr4 => [self.base.clone(), self.base.clone()],
            Device::Clr => [
                timing_for_table(&self.mode_table, RowMode::MaxCapacity, false, BASE_REFW_MS, &self.base)?,
                timing_for_table(
                    &self.mode_table,
                    RowMode::HighPerformance,
                    self.early_termination,
                    self.trefw_ms,
                    &self.base,
                )?,
            ],
        })
    }

    /// Effective placement fraction (always zero for a DDR4 device).
    pub fn effective_hp_fraction(&self) -> f64 {
        match self.device {
            Device::Ddr4 => 0.0,
            Device::Clr => self.hp_fraction,
        }
    }

    /// Reloadable INI text of the configuration, followed by derived timings
    /// and run conventions.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let t = &self.topology;
        let _ = writeln!(s, "[dram]");
        let _ = writeln!(s, "device = {}", self.device.as_str());
        for (k, v) in [
            ("channels", t.channels),
            ("ranks", t.ranks_per_channel),
            ("bankgroups", t.bankgroups_per_rank),
            ("banks_per_group", t.banks_per_bankgroup),
            ("subarrays", t.subarrays_per_bank),
            ("rows_per_subarray", t.rows_per_subarray),
            ("columns", t.columns_per_row),
            ("bytes_per_column", t.bytes_per_column),
            ("bus_mhz", t.bus_mhz),
            ("page_size", self.page_size),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "address_map = {}", self.address_map);
        let _ = writeln!(s, "\n[timing]");
        for (k, v) in self.base.named_values() {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (name, c) in [
            ("max_capacity", &self.mode_table.max_capacity),
            ("high_performance", &self.mode_table.high_performance_early_term),
            ("high_performance_no_et", &self.mode_table.high_performance),
        ] {
            let _ = writeln!(s, "\n[timing.{name}]");
            let _ = writeln!(s, "tRCD = {}\ntRAS = {}\ntRP = {}\ntWR = {}", c.t_rcd, c.t_ras, c.t_rp, c.t_wr);
        }
        let _ = writeln!(s, "\n[clr]");
        let _ = writeln!(s, "hp_fraction = {}", self.hp_fraction);
        let _ = writeln!(s, "early_termination = {}", self.early_termination);
        let _ = writeln!(s, "trefw_ms = {}", self.trefw_ms);
        let sc = &self.scheduler;
        let _ = writeln!(s, "\n[controller]");
        let _ = writeln!(s, "read_queue = {}\nwrite_queue = {}\ncap = {}", sc.read_queue, sc.write_queue, sc.cap);
        let _ = writeln!(s, "row_timeout_ns = {}", sc.row_timeout_ns);
        let _ = writeln!(s, "write_high = {}\nwrite_low = {}", sc.write_high, sc.write_low);
        let c = &self.core;
        let _ = writeln!(s, "\n[cpu]");
        let _ = writeln!(s, "cores = {}\nwidth = {}\nwindow = {}\nmshrs = {}", self.cores, c.width, c.window, c.mshrs);
        let _ = writeln!(s, "llc_latency = {}\noutbox = {}", c.llc_latency, c.outbox);
        let _ = writeln!(s, "llc_bytes = {}\nllc_ways = {}\ncore_mhz = {}", self.llc_bytes, self.llc_ways, self.core_mhz);
        let p = &self.power;
        let _ = writeln!(s, "\n[power]");
        let _ = writeln!(s, "vdd = {}\nidd0 = {}\nidd2n = {}\nidd3n = {}", p.vdd, p.idd0, p.idd2n, p.idd3n);
        let _ = writeln!(s, "idd4r = {}\nidd4w = {}\nidd5b = {}", p.idd4r, p.idd4w, p.idd5b);
        let _ = writeln!(s, "chips_per_rank = {}", p.chips_per_rank);
        let _ = writeln!(s, "\n[sim]");
        let _ = writeln!(s, "seed = {}\ninstructions = {}\nwarmup = {}", self.seed, self.instructions, self.warmup);
        let traces: Vec<String> = self.traces.iter().map(|p| p.display().to_string()).collect();
        let _ = writeln!(s, "traces = {}", traces.join(", "));
        let _ = writeln!(s, "commands_log = {}", self.commands_log);
        let w = &self.workload;
        let _ = writeln!(s, "\n[workload]");
        let _ = writeln!(s, "kind = {}\nrecords = {}\nfootprint = {}", w.kind.as_str(), w.records, w.footprint);
        let _ = writeln!(s, "bubbles_min = {}\nbubbles_max = {}", w.bubbles_min, w.bubbles_max);
        let _ = writeln!(s, "write_fraction = {}\nzipf_s = {}", w.write_fraction, w.zipf_s);

        let _ = writeln!(s, "\n[derived]");
        if let Ok([mc, hp]) = self.mode_timings() {
            for (name, t) in [("max_capacity", &mc), ("high_performance", &hp)] {
                for (k, v) in t.named_values() {
                    let _ = writeln!(s, "{name}.{k} = {v}");
                }
            }
        }
        let _ = writeln!(s, "\n[metadata]");
        let interp = self.device == Device::Clr && refw_is_interpolated(self.trefw_ms);
        let _ = writeln!(s, "trefw_interpolated = {interp}");
        let _ = writeln!(s, "request_queues = split read/write");
        let _ = writeln!(
            s,
            "write_drain = start at {}% full, stop at {}%, or when no reads wait",
            sc.write_high * 100.0,
            sc.write_low * 100.0
        );
        let _ = writeln!(s, "refresh_bins = {}", crate::dram::REFRESH_BINS);
        let _ = writeln!(s, "multicore_termination = early cores replay their trace; statistics frozen at quota");
        let _ = writeln!(s, "mode_switch = instantaneous while precharged");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_sections() {
        let cfg = SimConfig::from_ini_str(
            "[dram]\ndevice = ddr4\n[timing]\ntRFC = 260\n[clr]\nhp_fraction = 50\ntrefw_ms = 114\n\
             [timing.high_performance]\ntRAS = 15\n[sim]\ntraces = a.trace, b.trace\n[cpu]\ncores = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.device, Device::Ddr4);
        assert_eq!(cfg.base.t_rfc, 260.0);
        assert_eq!(cfg.hp_fraction, 50.0);
        assert_eq!(cfg.mode_table.high_performance_early_term.t_ras, 15.0);
        assert_eq!(cfg.traces.len(), 2);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            SimConfig::from_ini_str("[clr]\nbogus = 1\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            SimConfig::from_ini_str("[nope]\na = 1\n"),
            Err(ConfigError::UnknownSection(_))
        ));
    }

    #[test]
    fn out_of_range_refresh_window() {
        assert!(SimConfig::from_ini_str("[clr]\ntrefw_ms = 200\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = SimConfig::default();
        cfg.hp_fraction = 75.0;
        cfg.trefw_ms = 124.0;
        cfg.workload.kind = TraceKind::Zipf;
        let text = cfg.echo();
        assert!(text.contains("trefw_interpolated = true"));
        assert_eq!(SimConfig::from_ini_str(&text).unwrap(), cfg);
    }

    #[test]
    fn echo_shows_stretched_hp_timings() {
        let mut cfg = SimConfig::default();
        cfg.trefw_ms = 194.0;
        let text = cfg.echo();
        let line = text
            .lines()
            .find(|l| l.starts_with("high_performance.tRCD"))
            .unwrap();
        let v: f64 = line.split('=').nth(1).unwrap().trim().parse().unwrap();
        assert!((v - 8.74).abs() < 1e-9);
    }
}
