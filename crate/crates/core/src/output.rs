//! Writing run artifacts to an output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crate::clr::GroupGeometry;
use crate::config::SimConfig;
use crate::controller::write_command_log;
use crate::error::SimError;
use crate::sim::RunOutput;
use crate::stats::{write_energy_csv, write_stats_csv, StatsReport};

/// Writes `stats.csv`, `energy.csv`, `config.ini`, `placement.csv` (from the
/// last run) and, when logged, `commands.csv` (single runs) or
/// `commands-<label>.csv` (sweeps).
pub fn write_outputs(dir: &Path, cfg: &SimConfig, runs: &[RunOutput]) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    let reports: Vec<StatsReport> = runs.iter().map(|r| r.report.clone()).collect();
    write_stats_csv(BufWriter::new(File::create(dir.join("stats.csv"))?), &reports)?;
    write_energy_csv(BufWriter::new(File::create(dir.join("energy.csv"))?), &reports)?;
    fs::write(dir.join("config.ini"), cfg.echo())?;
    if let Some(last) = runs.last() {
        let map = cfg.address_map()?;
        if let Ok(g) = GroupGeometry::new(&map, &cfg.topology) {
            last.placement
                .write_csv(BufWriter::new(File::create(dir.join("placement.csv"))?), &g)?;
        }
    }
    for r in runs {
        if let Some(cmds) = &r.commands {
            let name = if runs.len() == 1 {
                "commands.csv".to_string()
            } else {
                format!("commands-{}.csv", r.report.label)
            };
            write_command_log(BufWriter::new(File::create(dir.join(name))?), cmds)?;
        }
    }
    Ok(())
}
