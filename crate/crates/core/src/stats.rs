//! Run statistics and their CSV forms.

use std::io::Write;

use crate::controller::ControllerStats;
use crate::dram::CommandKind;
use crate::energy::EnergyLedger;

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub label: String,
    pub device: String,
    pub hp_fraction: f64,
    pub capacity_percent: f64,
    pub trefw_ms: f64,
    pub early_termination: bool,
    pub trefw_interpolated: bool,
    pub seed: u64,
    pub ipc: Vec<f64>,
    pub alone_ipc: Option<Vec<f64>>,
    pub weighted_speedup: Option<f64>,
    pub instructions: Vec<u64>,
    pub mpki: Vec<f64>,
    pub cpu_cycles: u64,
    pub mem_cycles: u64,
    pub controller: ControllerStats,
    pub open_rows_at_end: u64,
    pub hp_pages: u64,
    pub touched_pages: u64,
    pub hp_access_fraction: f64,
    pub energy: EnergyLedger,
}

pub const STATS_HEADER: &[&str] = &[
    "label",
    "device",
    "hp_fraction",
    "capacity_pct",
    "trefw_ms",
    "early_termination",
    "trefw_interpolated",
    "seed",
    "cores",
    "ipc",
    "weighted_speedup",
    "instructions",
    "mpki",
    "cpu_cycles",
    "mem_cycles",
    "reads",
    "writes",
    "forwarded_reads",
    "row_hits",
    "row_misses",
    "row_conflicts",
    "row_hit_rate",
    "avg_read_latency_cycles",
    "act",
    "pre",
    "rd",
    "wr",
    "ref",
    "ref_max_capacity",
    "ref_high_performance",
    "timeout_pre",
    "open_rows_at_end",
    "hp_pages",
    "touched_pages",
    "hp_access_fraction",
    "energy_j",
    "refresh_energy_j",
    "avg_power_w",
];

pub const ENERGY_HEADER: &[&str] = &[
    "label",
    "act_pre_j",
    "read_j",
    "write_j",
    "refresh_j",
    "background_j",
    "total_j",
    "elapsed_s",
    "avg_power_w",
];

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

impl StatsReport {
    pub fn ipc_total(&self) -> f64 {
        self.ipc.iter().sum()
    }

    pub fn row_hit_rate(&self) -> f64 {
        let c = &self.controller;
        let n = c.row_hits + c.row_misses + c.row_conflicts;
        if n == 0 {
            0.0
        } else {
            c.row_hits as f64 / n as f64
        }
    }

    pub fn avg_read_latency(&self) -> f64 {
        let c = &self.controller;
        let served = c.reads - c.forwarded_reads;
        if served == 0 {
            0.0
        } else {
            c.read_latency_total as f64 / served as f64
        }
    }

    pub fn avg_power(&self) -> f64 {
        if self.energy.elapsed > 0.0 {
            self.energy.total() / self.energy.elapsed
        } else {
            0.0
        }
    }

    pub fn command_count(&self, kind: CommandKind) -> u64 {
        self.controller.command_count(kind)
    }

    pub fn csv_row(&self) -> Vec<String> {
        let c = &self.controller;
        vec![
            self.label.clone(),
            self.device.clone(),
            self.hp_fraction.to_string(),
            self.capacity_percent.to_string(),
            self.trefw_ms.to_string(),
            self.early_termination.to_string(),
            self.trefw_interpolated.to_string(),
            self.seed.to_string(),
            self.ipc.len().to_string(),
            join(&self.ipc),
            self.weighted_speedup.map(|w| w.to_string()).unwrap_or_default(),
            join(&self.instructions),
            join(&self.mpki),
            self.cpu_cycles.to_string(),
            self.mem_cycles.to_string(),
            c.reads.to_string(),
            c.writes.to_string(),
            c.forwarded_reads.to_string(),
            c.row_hits.to_string(),
            c.row_misses.to_string(),
            c.row_conflicts.to_string(),
            self.row_hit_rate().to_string(),
            self.avg_read_latency().to_string(),
            c.command_count(CommandKind::Act).to_string(),
            c.command_count(CommandKind::Pre).to_string(),
            c.command_count(CommandKind::Rd).to_string(),
            c.command_count(CommandKind::Wr).to_string(),
            c.command_count(CommandKind::Ref).to_string(),
            c.refreshes_by_mode[0].to_string(),
            c.refreshes_by_mode[1].to_string(),
            c.timeout_precharges.to_string(),
            self.open_rows_at_end.to_string(),
            self.hp_pages.to_string(),
            self.touched_pages.to_string(),
            self.hp_access_fraction.to_string(),
            self.energy.total().to_string(),
            self.energy.refresh.to_string(),
            self.avg_power().to_string(),
        ]
    }

    pub fn energy_row(&self) -> Vec<String> {
        let e = &self.energy;
        vec![
            self.label.clone(),
            e.act_pre.to_string(),
            e.read.to_string(),
            e.write.to_string(),
            e.refresh.to_string(),
            e.background.to_string(),
            e.total().to_string(),
            e.elapsed.to_string(),
            self.avg_power().to_string(),
        ]
    }
}

pub fn write_stats_csv<W: Write>(out: W, reports: &[StatsReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATS_HEADER)?;
    for r in reports {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_energy_csv<W: Write>(out: W, reports: &[StatsReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENERGY_HEADER)?;
    for r in reports {
        w.write_record(r.energy_row())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> StatsReport {
        StatsReport {
            label: "x".into(),
            device: "clr".into(),
            hp_fraction: 25.0,
            capacity_percent: 87.5,
            trefw_ms: 64.0,
            early_termination: true,
            trefw_interpolated: false,
            seed: 1,
            ipc: vec![1.5],
            alone_ipc: None,
            weighted_speedup: None,
            instructions: vec![1000],
            mpki: vec![3.0],
            cpu_cycles: 10,
            mem_cycles: 3,
            controller: ControllerStats {
                row_hits: 3,
                row_misses: 1,
                ..Default::default()
            },
            open_rows_at_end: 0,
            hp_pages: 1,
            touched_pages: 4,
            hp_access_fraction: 0.5,
            energy: EnergyLedger {
                background: 2.0,
                elapsed: 4.0,
                ..Default::default()
            },
        }
    }

    #[test]
    fn row_width_matches_header() {
        let r = report();
        assert_eq!(r.csv_row().len(), STATS_HEADER.len());
        assert_eq!(r.energy_row().len(), ENERGY_HEADER.len());
        assert_eq!(r.row_hit_rate(), 0.75);
        assert_eq!(r.avg_power(), 0.5);
    }

    #[test]
    fn csv_output() {
        let mut buf = Vec::new();
        write_stats_csv(&mut buf, &[report()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("label,device,hp_fraction"));
    }
}
