//! Simulation driver: memory system assembly, the CPU-driven run loop and a
//! memory-only driver.

use std::sync::Arc;

use crate::address::{AddressMap, DramCoord};
use crate::clr::{GroupGeometry, RowModeTable};
use crate::config::{Device, SimConfig};
use crate::controller::{Controller, MemRequest, RefreshPool, RefreshScheduler, ReqKind, RowModes};
use crate::cpu::{weighted_speedup, Core, Llc};
use crate::dram::{refw_is_interpolated, Cycle, DramCommand, DramTopology, ModeTimings, RowMode, TimingParams};
use crate::energy::{EnergyAccountant, EnergyLedger};
use crate::error::SimError;
use crate::stats::StatsReport;
use crate::workload::{
    generate, hp_group_count, load_trace, mpki, page_key, plan_placement, profile_cores, GenParams, PageProfile,
    PlacementPlan, TraceRecord,
};

/// Row modes resolved through the address map and the group mode table.
#[derive(Debug, Clone)]
pub struct ModeLookup {
    map: AddressMap,
    geometry: Option<GroupGeometry>,
    table: Option<RowModeTable>,
}

impl ModeLookup {
    pub fn uniform(map: AddressMap) -> Self {
        Self {
            map,
            geometry: None,
            table: None,
        }
    }

    pub fn with_table(map: AddressMap, geometry: GroupGeometry, table: RowModeTable) -> Self {
        Self {
            map,
            geometry: Some(geometry),
            table: Some(table),
        }
    }

    pub fn table(&self) -> Option<&RowModeTable> {
        self.table.as_ref()
    }

    pub fn geometry(&self) -> Option<&GroupGeometry> {
        self.geometry.as_ref()
    }

    pub fn capacity_percent(&self) -> f64 {
        self.table.as_ref().map_or(100.0, RowModeTable::capacity_percent)
    }
}

impl RowModes for ModeLookup {
    fn mode_of(&self, coord: &DramCoord) -> RowMode {
        match (&self.geometry, &self.table) {
            (Some(g), Some(t)) => t.mode(g.group_of_coord(&self.map, coord)),
            _ => RowMode::MaxCapacity,
        }
    }
}

/// Rank-local row id used by refresh pools.
pub fn rank_row_id(topo: &DramTopology, coord: &DramCoord) -> u32 {
    (coord.flat_bank(topo) as u64 * topo.rows_per_bank() + coord.row as u64) as u32
}

fn refresh_pools(
    topo: &DramTopology,
    modes: &ModeLookup,
    params: &[TimingParams; 2],
    channel: u32,
    rank: u32,
) -> Vec<RefreshPool> {
    let mut rows: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
    let uniform = match modes.table() {
        None => Some(RowMode::MaxCapacity),
        Some(t) if t.hp_groups() == 0 => Some(RowMode::MaxCapacity),
        Some(t) if t.hp_groups() == t.groups() => Some(RowMode::HighPerformance),
        _ => None,
    };
    match uniform {
        Some(m) => rows[m.index()] = (0..topo.rows_per_rank() as u32).collect(),
        None => {
            for bg in 0..topo.bankgroups_per_rank as u32 {
                for bank in 0..topo.banks_per_bankgroup as u32 {
                    for row in 0..topo.rows_per_bank() as u32 {
                        let c = DramCoord {
                            channel,
                            rank,
                            bankgroup: bg,
                            bank,
                            row,
                            ..Default::default()
                        };
                        rows[modes.mode_of(&c).index()].push(rank_row_id(topo, &c));
                    }
                }
            }
        }
    }
    let tck = topo.tck_ns();
    RowMode::ALL
        .iter()
        .zip(rows)
        .filter(|(_, r)| !r.is_empty())
        .map(|(m, r)| {
            let p = &params[m.index()];
            let refw = (p.t_refw_ms * 1e6 / tck).round() as Cycle;
            let refi = refw / crate::dram::REFRESH_BINS;
            let rfc = crate::dram::ns_to_cycles(p.t_rfc, tck);
            RefreshPool::new(*m, refw, refi, rfc, r)
        })
        .collect()
}

/// Memory-side result of a run.
#[derive(Debug, Clone)]
pub struct MemoryOutcome {
    pub controller: crate::controller::ControllerStats,
    pub energy: EnergyLedger,
    pub commands: Option<Vec<DramCommand>>,
    pub mem_cycles: Cycle,
    pub open_rows: u64,
    pub capacity_percent: f64,
    /// Worst refresh interval over every bin of every pool, per mode, with
    /// the pool's window: `(mode, worst_gap, refw)`.
    pub refresh_worst: Vec<(RowMode, Cycle, Cycle)>,
}

/// Controllers, row-mode table and energy accounting for all channels.
#[derive(Debug, Clone)]
pub struct MemorySystem {
    topo: DramTopology,
    map: AddressMap,
    controllers: Vec<Controller>,
    modes: ModeLookup,
    energy: EnergyAccountant,
    log: Option<Vec<DramCommand>>,
    cycle: Cycle,
    completed: Vec<MemRequest>,
}

impl MemorySystem {
    /// Builds the memory side with the first `hp_groups` reconfiguration
    /// groups in high-performance mode.
    pub fn new(cfg: &SimConfig, hp_groups: u64) -> Result<Self, SimError> {
        let topo = cfg.topology.clone();
        let map = cfg.address_map()?;
        let params = cfg.mode_timings()?;
        let modes = match cfg.device {
            Device::Ddr4 => ModeLookup::uniform(map.clone()),
            Device::Clr => {
                let g = GroupGeometry::new(&map, &topo).map_err(crate::config::ConfigError::from)?;
                let t = RowModeTable::with_hp_prefix(&g, hp_groups);
                ModeLookup::with_table(map.clone(), g, t)
            }
        };
        let tck = topo.tck_ns();
        let timings = ModeTimings([params[0].to_cycles(tck), params[1].to_cycles(tck)]);
        let controllers = (0..topo.channels as u32)
            .map(|ch| {
                let ranks = (0..topo.ranks_per_channel as u32)
                    .map(|r| RefreshScheduler::new(refresh_pools(&topo, &modes, &params, ch, r)))
                    .collect();
                Controller::new(ch, &topo, timings, cfg.scheduler.clone(), ranks)
            })
            .collect();
        let [mc, hp] = params;
        let energy = EnergyAccountant::new(&topo, cfg.power.clone(), mc, hp);
        Ok(Self {
            topo,
            map,
            controllers,
            modes,
            energy,
            log: cfg.commands_log.then(Vec::new),
            cycle: 0,
            completed: Vec::new(),
        })
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn cycle(&self) -> Cycle {
        self.cycle
    }

    pub fn topology(&self) -> &DramTopology {
        &self.topo
    }

    pub fn map(&self) -> &AddressMap {
        &self.map
    }

    pub fn modes(&self) -> &ModeLookup {
        &self.modes
    }

    pub fn controllers(&self) -> &[Controller] {
        &self.controllers
    }

    pub fn commands(&self) -> Option<&[DramCommand]> {
        self.log.as_deref()
    }

    /// Offers a request to its channel; `false` means back-pressure.
    pub fn try_send(&mut self, kind: ReqKind, addr: u64, core: usize) -> bool {
        let coord = self.map.decode_unchecked(addr);
        let req = MemRequest::new(kind, addr, coord, core, self.cycle);
        self.controllers[coord.channel as usize].enqueue(req, self.cycle).is_ok()
    }

    /// Runs one memory cycle.
    pub fn tick(&mut self) -> Result<(), SimError> {
        let now = self.cycle;
        for c in &mut self.controllers {
            if let Some(cmd) = c.tick(now, &self.modes)? {
                self.energy.account(&cmd)?;
                if let Some(log) = &mut self.log {
                    log.push(cmd);
                }
            }
            while let Some(r) = c.pop_completed(now) {
                self.completed.push(r);
            }
        }
        self.cycle += 1;
        Ok(())
    }

    pub fn take_completed(&mut self) -> std::vec::Drain<'_, MemRequest> {
        self.completed.drain(..)
    }

    pub fn is_idle(&self) -> bool {
        self.controllers.iter().all(Controller::is_idle)
    }

    /// Advances to `target`, skipping stretches where nothing can happen.
    pub fn advance_to(&mut self, target: Cycle) -> Result<(), SimError> {
        while self.cycle < target {
            let wake = self
                .controllers
                .iter()
                .map(|c| c.next_wake(self.cycle))
                .min()
                .unwrap_or(Cycle::MAX);
            if wake > self.cycle {
                self.cycle = wake.min(target);
                continue;
            }
            self.tick()?;
        }
        Ok(())
    }

    /// Ticks until every queued request has completed.
    pub fn drain(&mut self) -> Result<(), SimError> {
        while !self.is_idle() {
            self.tick()?;
        }
        Ok(())
    }

    /// Feeds `(kind, addr)` requests open-loop, one per cycle when the
    /// controller accepts it, then drains.
    pub fn run_requests(&mut self, reqs: impl IntoIterator<Item = (ReqKind, u64)>) -> Result<(), SimError> {
        for (kind, addr) in reqs {
            while !self.try_send(kind, addr, 0) {
                self.tick()?;
                self.completed.clear();
            }
            self.tick()?;
            self.completed.clear();
        }
        self.drain()?;
        self.completed.clear();
        Ok(())
    }

    pub fn finish(mut self) -> Result<MemoryOutcome, SimError> {
        let energy = self.energy.finish(self.cycle)?;
        let mut stats = crate::controller::ControllerStats::default();
        let mut open_rows = 0;
        let mut worst: Vec<(RowMode, Cycle, Cycle)> = Vec::new();
        for c in &self.controllers {
            let s = c.stats();
            stats.reads += s.reads;
            stats.writes += s.writes;
            stats.forwarded_reads += s.forwarded_reads;
            stats.row_hits += s.row_hits;
            stats.row_misses += s.row_misses;
            stats.row_conflicts += s.row_conflicts;
            for k in 0..5 {
                stats.commands[k] += s.commands[k];
            }
            for m in 0..2 {
                stats.refreshes_by_mode[m] += s.refreshes_by_mode[m];
            }
            stats.read_latency_total += s.read_latency_total;
            stats.timeout_precharges += s.timeout_precharges;
            open_rows += c.open_rows().len() as u64;
            for sched in c.refresh() {
                for p in sched.pools() {
                    let gap = p.worst_gap(self.cycle);
                    match worst.iter_mut().find(|w| w.0 == p.mode()) {
                        Some(w) => w.1 = w.1.max(gap),
                        None => worst.push((p.mode(), gap, p.refw())),
                    }
                }
            }
        }
        Ok(MemoryOutcome {
            controller: stats,
            energy,
            commands: self.log,
            mem_cycles: self.cycle,
            open_rows,
            capacity_percent: self.modes.capacity_percent(),
            refresh_worst: worst,
        })
    }
}

/// Page placement for the traces under `cfg`.
pub fn placement_for(cfg: &SimConfig, profile: &PageProfile) -> Result<PlacementPlan, SimError> {
    let topo = &cfg.topology;
    let map = cfg.address_map()?;
    match GroupGeometry::new(&map, topo) {
        Ok(g) => Ok(plan_placement(profile, cfg.effective_hp_fraction(), &g)?),
        Err(e) if cfg.device == Device::Ddr4 => {
            // Without reconfiguration groups pages take frames in order.
            let frames = topo.capacity_bytes() >> map.page_offset_bits();
            if profile.touched() as u64 > frames {
                return Err(SimError::Invalid(format!("{} pages exceed {frames} frames ({e})", profile.touched())));
            }
            Ok(PlacementPlan {
                fraction: 0.0,
                hp_pages: Default::default(),
                hp_groups: 0,
                frames: profile.counts.keys().enumerate().map(|(i, p)| (*p, i as u64)).collect(),
                page_bits: map.page_offset_bits(),
            })
        }
        Err(e) => Err(crate::config::ConfigError::from(e).into()),
    }
}

/// Loads the configured traces, or generates one synthetic trace per core.
pub fn load_traces(cfg: &SimConfig) -> Result<Vec<Arc<Vec<TraceRecord>>>, SimError> {
    if !cfg.traces.is_empty() {
        return cfg
            .traces
            .iter()
            .map(|p| {
                let t = load_trace(p)?;
                if t.is_empty() {
                    return Err(SimError::Invalid(format!("trace {} has no records", p.display())));
                }
                Ok(Arc::new(t))
            })
            .collect();
    }
    (0..cfg.cores)
        .map(|i| {
            let p = GenParams {
                seed: cfg.seed.wrapping_add(i as u64),
                page_size: cfg.page_size,
                ..cfg.workload.clone()
            };
            Ok(Arc::new(generate(&p)?))
        })
        .collect()
}

/// Full CPU-driven run output.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: StatsReport,
    pub commands: Option<Vec<DramCommand>>,
    pub placement: PlacementPlan,
    pub refresh_worst: Vec<(RowMode, Cycle, Cycle)>,
}

const STALL_LIMIT: u64 = 50_000_000;

/// Runs the traces (one per core) to their instruction quotas.
pub fn run_traces(cfg: &SimConfig, traces: &[Arc<Vec<TraceRecord>>], label: &str) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    if traces.is_empty() || traces.iter().any(|t| t.is_empty()) {
        return Err(SimError::Invalid("every core needs a non-empty trace".into()));
    }
    let slices: Vec<&[TraceRecord]> = traces.iter().map(|t| t.as_slice()).collect();
    let profile = profile_cores(&slices, cfg.page_size);
    let plan = placement_for(cfg, &profile)?;
    let groups = plan.hp_groups;
    let mut mem = MemorySystem::new(cfg, groups)?;
    let mut llc = Llc::new(cfg.llc_bytes, cfg.llc_ways, 64);
    let mut cores: Vec<Core> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| Core::new(i, cfg.core.clone(), t.clone(), cfg.warmup, cfg.instructions))
        .collect();
    let page_bits = cfg.page_size.trailing_zeros();
    let offset_mask = cfg.page_size - 1;
    let translate = |core: usize, addr: u64| -> u64 {
        plan.translate(page_key(core, addr >> page_bits), addr & offset_mask)
            .expect("every traced page is placed")
    };

    let core_mhz = cfg.core_mhz;
    let bus_mhz = cfg.topology.bus_mhz;
    let mut acc = 0u64;
    let mut now = 0u64;
    let mut last_retired = 0u64;
    let mut last_progress = 0u64;
    loop {
        for c in &mut cores {
            c.tick(now, &mut llc, &translate);
        }
        acc += bus_mhz;
        while acc >= core_mhz {
            acc -= core_mhz;
            for c in &mut cores {
                while let Some(o) = c.peek_outgoing(now) {
                    if !mem.try_send(o.kind, o.addr, c.id()) {
                        break;
                    }
                    c.pop_outgoing();
                }
            }
            mem.tick()?;
            let done: Vec<MemRequest> = mem.take_completed().collect();
            for r in done {
                if r.kind == ReqKind::Read {
                    cores[r.core_id].fill(r.line(), now, &mut llc);
                }
            }
        }
        now += 1;
        if cores.iter().all(Core::is_done) {
            break;
        }
        let retired: u64 = cores.iter().map(Core::retired).sum();
        if retired != last_retired {
            last_retired = retired;
            last_progress = now;
        } else if now - last_progress > STALL_LIMIT {
            return Err(SimError::Stalled(STALL_LIMIT));
        }
    }

    let ipc: Vec<f64> = cores.iter().map(|c| c.ipc(now)).collect();
    let instructions: Vec<u64> = cores
        .iter()
        .map(|c| match (c.warm_mark(), c.done_mark()) {
            (Some(w), Some(d)) => d.retired - w.retired,
            _ => 0,
        })
        .collect();
    let mpkis: Vec<f64> = cores
        .iter()
        .zip(&instructions)
        .map(|(c, n)| mpki(c.measured_stats().reads_sent, *n))
        .collect();
    let hp_access_fraction = profile.coverage(&plan.hp_pages);
    let out = mem.finish()?;
    let report = StatsReport {
        label: label.to_string(),
        device: cfg.device.as_str().to_string(),
        hp_fraction: cfg.effective_hp_fraction(),
        capacity_percent: out.capacity_percent,
        trefw_ms: cfg.trefw_ms,
        early_termination: cfg.early_termination,
        trefw_interpolated: cfg.device == Device::Clr && refw_is_interpolated(cfg.trefw_ms),
        seed: cfg.seed,
        ipc,
        alone_ipc: None,
        weighted_speedup: None,
        instructions,
        mpki: mpkis,
        cpu_cycles: now,
        mem_cycles: out.mem_cycles,
        controller: out.controller,
        open_rows_at_end: out.open_rows,
        hp_pages: plan.hp_pages.len() as u64,
        touched_pages: profile.touched() as u64,
        hp_access_fraction,
        energy: out.energy,
    };
    Ok(RunOutput {
        report,
        commands: out.commands,
        placement: plan,
        refresh_worst: out.refresh_worst,
    })
}

/// Runs the traces together and, for more than one core, each trace alone to
/// compute weighted speedup.
pub fn run_with_speedup(
    cfg: &SimConfig,
    traces: &[Arc<Vec<TraceRecord>>],
    label: &str,
) -> Result<RunOutput, SimError> {
    let mut out = run_traces(cfg, traces, label)?;
    if traces.len() > 1 {
        let mut solo = cfg.clone();
        solo.cores = 1;
        solo.commands_log = false;
        let alone = traces
            .iter()
            .map(|t| Ok(run_traces(&solo, std::slice::from_ref(t), label)?.report.ipc[0]))
            .collect::<Result<Vec<f64>, SimError>>()?;
        out.report.weighted_speedup = Some(weighted_speedup(&out.report.ipc, &alone)?);
        out.report.alone_ipc = Some(alone);
    }
    Ok(out)
}

/// High-performance group count that `cfg` would use for its fraction.
pub fn configured_hp_groups(cfg: &SimConfig) -> Result<u64, SimError> {
    if cfg.device == Device::Ddr4 {
        return Ok(0);
    }
    let map = cfg.address_map()?;
    let g = GroupGeometry::new(&map, &cfg.topology).map_err(crate::config::ConfigError::from)?;
    Ok(hp_group_count(g.groups(), cfg.hp_fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::CommandKind;
    use crate::workload::TraceKind;

    fn small_cfg() -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.instructions = 20_000;
        cfg.warmup = 2_000;
        cfg.workload.records = 5_000;
        cfg.workload.footprint = 16 << 20;
        cfg
    }

    #[test]
    fn single_core_run_is_deterministic() {
        let cfg = small_cfg();
        let traces = load_traces(&cfg).unwrap();
        let a = run_traces(&cfg, &traces, "a").unwrap();
        let b = run_traces(&cfg, &traces, "a").unwrap();
        assert_eq!(a.report, b.report);
        assert!(a.report.ipc[0] > 0.0 && a.report.ipc[0] <= 4.0);
        let c = &a.report.controller;
        assert_eq!(
            c.command_count(CommandKind::Act),
            c.command_count(CommandKind::Pre) + a.report.open_rows_at_end
        );
    }

    #[test]
    fn stream_trace_mostly_hits() {
        let mut cfg = small_cfg();
        cfg.device = Device::Ddr4;
        cfg.workload.kind = TraceKind::Stream;
        cfg.workload.bubbles_max = 4;
        cfg.workload.write_fraction = 0.0;
        let traces = load_traces(&cfg).unwrap();
        let r = run_traces(&cfg, &traces, "s").unwrap().report;
        assert!(r.row_hit_rate() > 0.9, "{}", r.row_hit_rate());
    }

    #[test]
    fn multicore_speedup() {
        let mut cfg = small_cfg();
        cfg.cores = 2;
        let traces = load_traces(&cfg).unwrap();
        let r = run_with_speedup(&cfg, &traces, "mc").unwrap().report;
        let ws = r.weighted_speedup.unwrap();
        assert!(ws > 0.5 && ws <= 2.0 + 1e-9, "{ws}");
    }

    #[test]
    fn idle_fast_forward_refreshes() {
        let cfg = SimConfig::default();
        let mut mem = MemorySystem::new(&cfg, 0).unwrap();
        // 1 ms of idle time at 1200 MHz.
        mem.advance_to(1_200_000).unwrap();
        let out = mem.finish().unwrap();
        let refs = out.controller.command_count(CommandKind::Ref);
        assert_eq!(refs, 128);
    }
}
