mod common;

use clr_sim::controller::RowModes;
use clr_sim::dram::CommandKind;
use clr_sim::sim::{configured_hp_groups, MemorySystem};
use clr_sim::{Device, SimConfig};

use common::oracle::{check_log, OracleTimings};

fn logged_run(device: Device, x: f64, trefw: f64, seed: u64, n: usize) -> (SimConfig, MemorySystem) {
    let mut cfg = SimConfig::default();
    cfg.device = device;
    cfg.hp_fraction = x;
    cfg.trefw_ms = trefw;
    cfg.commands_log = true;
    let hp = configured_hp_groups(&cfg).unwrap();
    let mut mem = MemorySystem::new(&cfg, hp).unwrap();
    mem.run_requests(common::mixed_requests(seed, n, cfg.topology.capacity_bytes(), 0.3))
        .unwrap();
    (cfg, mem)
}

fn violations(cfg: &SimConfig, mem: &MemorySystem, log: &[clr_sim::dram::DramCommand]) -> usize {
    let t = OracleTimings::new(&cfg.mode_timings().unwrap(), cfg.topology.tck_ns());
    let modes = mem.modes().clone();
    check_log(log, &cfg.topology, &t, &|c| modes.mode_of(&c.coord)).len()
}

#[test]
fn ddr4_log_is_legal() {
    let (cfg, mem) = logged_run(Device::Ddr4, 0.0, 64.0, 7, 20_000);
    let log = mem.commands().unwrap();
    assert!(log.iter().any(|c| c.kind == CommandKind::Ref));
    assert_eq!(violations(&cfg, &mem, log), 0);
}

#[test]
fn all_hp_extended_window_log_is_legal() {
    let (cfg, mem) = logged_run(Device::Clr, 100.0, 194.0, 8, 20_000);
    let log = mem.commands().unwrap();
    assert!(log.iter().all(|c| c.mode == clr_sim::dram::RowMode::HighPerformance));
    assert_eq!(violations(&cfg, &mem, log), 0);
}

#[test]
fn oracle_catches_shifted_commands() {
    let (cfg, mem) = logged_run(Device::Clr, 50.0, 64.0, 9, 5_000);
    let log = mem.commands().unwrap().to_vec();
    assert_eq!(violations(&cfg, &mem, &log), 0);

    // Pull a column command one cycle closer to its ACT.
    let mut early = log.clone();
    let i = early
        .windows(2)
        .position(|w| w[0].kind == CommandKind::Act && w[1].kind == CommandKind::Rd && w[1].coord.bank == w[0].coord.bank && w[1].coord.bankgroup == w[0].coord.bankgroup)
        .map(|i| i + 1)
        .expect("an ACT immediately followed by its read");
    early[i].issue_cycle -= 1;
    assert!(violations(&cfg, &mem, &early) > 0);

    // Flip the recorded mode of an activation.
    let mut flipped = log.clone();
    let j = flipped.iter().position(|c| c.kind == CommandKind::Act).unwrap();
    flipped[j].mode = match flipped[j].mode {
        clr_sim::dram::RowMode::MaxCapacity => clr_sim::dram::RowMode::HighPerformance,
        clr_sim::dram::RowMode::HighPerformance => clr_sim::dram::RowMode::MaxCapacity,
    };
    assert!(violations(&cfg, &mem, &flipped) > 0);

    // Drop a precharge.
    let mut dropped = log;
    let k = dropped.iter().position(|c| c.kind == CommandKind::Pre).unwrap();
    dropped.remove(k);
    assert!(violations(&cfg, &mem, &dropped) > 0);
}
