use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use clr_sim::output::write_outputs;
use clr_sim::sim::{load_traces, run_with_speedup, RunOutput};
use clr_sim::sweep::{sweep_fraction, sweep_refresh, FRACTIONS, REFRESH_WINDOWS_MS};
use clr_sim::workload::{generate, write_trace, GenParams, TraceKind};
use clr_sim::{Device, SimConfig};

#[derive(Parser)]
#[command(name = "clr-sim", version, about = "Capacity-latency reconfigurable DRAM simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration.
    Run(RunArgs),
    /// DDR4 baseline plus CLR at 0, 25, 50, 75 and 100 percent high-performance rows.
    SweepFraction(RunArgs),
    /// DDR4 baseline plus all-high-performance CLR at several refresh windows.
    SweepRefresh(RunArgs),
    /// Write a synthetic trace.
    GenTrace(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// INI configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One trace per core.
    #[arg(long = "trace")]
    traces: Vec<PathBuf>,
    #[arg(long)]
    hp_fraction: Option<f64>,
    /// Refresh window of high-performance rows, ms.
    #[arg(long)]
    trefw: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulated instructions per core after warm-up.
    #[arg(long)]
    instructions: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    /// Use the fixed DDR4 device.
    #[arg(long)]
    ddr4: bool,
    /// Also write the issued command log.
    #[arg(long)]
    commands: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: TraceKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    records: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Footprint in bytes.
    #[arg(long, default_value_t = 64 << 20)]
    footprint: u64,
    #[arg(long, default_value_t = 0.25)]
    write_fraction: f64,
    #[arg(long, default_value_t = 0)]
    bubbles_min: u64,
    #[arg(long, default_value_t = 20)]
    bubbles_max: u64,
    #[arg(long, default_value_t = 1.0)]
    zipf_s: f64,
}

fn parse_kind(s: &str) -> Result<TraceKind, String> {
    TraceKind::parse(s).ok_or_else(|| format!("unknown trace kind '{s}' (random, stream, zipf)"))
}

fn build_config(a: &RunArgs) -> Result<SimConfig> {
    let mut cfg = match &a.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if !a.traces.is_empty() {
        cfg.traces = a.traces.clone();
        cfg.cores = a.traces.len();
    }
    if let Some(x) = a.hp_fraction {
        cfg.hp_fraction = x;
    }
    if let Some(w) = a.trefw {
        cfg.trefw_ms = w;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.instructions {
        cfg.instructions = n;
    }
    if let Some(n) = a.warmup {
        cfg.warmup = n;
    }
    if a.ddr4 {
        cfg.device = Device::Ddr4;
    }
    if a.out.is_some() {
        cfg.out_dir = a.out.clone();
    }
    cfg.commands_log |= a.commands;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &SimConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn summarize(runs: &[RunOutput], dir: &Path) {
    for r in runs {
        let s = &r.report;
        let ws = s.weighted_speedup.map(|w| format!(" ws={w:.4}")).unwrap_or_default();
        println!(
            "{:<12} ipc={:.4}{ws} hit_rate={:.3} capacity={:.1}% energy={:.6} J",
            s.label,
            s.ipc_total(),
            s.row_hit_rate(),
            s.capacity_percent,
            s.energy.total()
        );
    }
    println!("wrote {}", dir.display());
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run(a) => {
            let cfg = build_config(&a)?;
            let traces = load_traces(&cfg)?;
            let label = match cfg.device {
                Device::Ddr4 => "ddr4".to_string(),
                Device::Clr => format!("clr-x{}", cfg.hp_fraction),
            };
            let runs = vec![run_with_speedup(&cfg, &traces, &label)?];
            let dir = out_dir(&cfg);
            write_outputs(&dir, &cfg, &runs)?;
            summarize(&runs, &dir);
        }
        Cmd::SweepFraction(a) => {
            if a.hp_fraction.is_some() {
                bail!("sweep-fraction sets the fraction itself");
            }
            let cfg = build_config(&a)?;
            let traces = load_traces(&cfg)?;
            let runs = sweep_fraction(&cfg, &traces, &FRACTIONS)?;
            let dir = out_dir(&cfg);
            write_outputs(&dir, &cfg, &runs)?;
            summarize(&runs, &dir);
        }
        Cmd::SweepRefresh(a) => {
            if a.trefw.is_some() {
                bail!("sweep-refresh sets the refresh window itself");
            }
            let cfg = build_config(&a)?;
            let traces = load_traces(&cfg)?;
            let runs = sweep_refresh(&cfg, &traces, &REFRESH_WINDOWS_MS)?;
            let dir = out_dir(&cfg);
            write_outputs(&dir, &cfg, &runs)?;
            summarize(&runs, &dir);
        }
        Cmd::GenTrace(a) => {
            let p = GenParams {
                kind: a.kind,
                seed: a.seed,
                records: a.records,
                footprint: a.footprint,
                bubbles_min: a.bubbles_min,
                bubbles_max: a.bubbles_max,
                write_fraction: a.write_fraction,
                zipf_s: a.zipf_s,
                ..GenParams::default()
            };
            let trace = generate(&p)?;
            let f = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            write_trace(BufWriter::new(f), &trace)?;
            println!("wrote {} records to {}", trace.len(), a.out.display());
        }
    }
    Ok(())
}
