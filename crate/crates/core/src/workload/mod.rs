//! Trace ingestion, synthetic traces, page profiling and hot-page placement.

mod gen;
mod trace;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use thiserror::Error;

pub use gen::{gen_random, gen_stream, gen_zipf, generate, GenError, GenParams, TraceKind, LINE_BYTES};
pub use trace::{load_trace, parse_trace, parse_trace_str, write_trace, TraceError, TraceRecord};

use crate::clr::GroupGeometry;
use crate::dram::RowMode;

/// Bit position of the core id inside a page key.
pub const CORE_SHIFT: u32 = 48;

/// Page key of `page` as seen by `core`; cores have disjoint address spaces.
pub fn page_key(core: usize, page: u64) -> u64 {
    ((core as u64) << CORE_SHIFT) | page
}

/// Accesses per page number.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageProfile {
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
}

impl PageProfile {
    pub fn add(&mut self, page: u64, n: u64) {
        *self.counts.entry(page).or_default() += n;
        self.total += n;
    }

    pub fn touched(&self) -> usize {
        self.counts.len()
    }

    /// Pages by descending access count, ties by ascending page number.
    pub fn ranked(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.counts.iter().map(|(p, c)| (*p, *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Fraction of accesses that fall on `pages`.
    pub fn coverage(&self, pages: &BTreeSet<u64>) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let hit: u64 = pages.iter().filter_map(|p| self.counts.get(p)).sum();
        hit as f64 / self.total as f64
    }
}

pub fn profile_pages(trace: &[TraceRecord], page_size: u64) -> PageProfile {
    profile_cores(&[trace], page_size)
}

/// Joint profile of several cores' traces, keyed by [`page_key`].
pub fn profile_cores(traces: &[&[TraceRecord]], page_size: u64) -> PageProfile {
    let shift = page_size.trailing_zeros();
    let mut p = PageProfile::default();
    for (core, t) in traces.iter().enumerate() {
        for r in t.iter() {
            p.add(page_key(core, r.addr >> shift), 1);
        }
    }
    p
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlacementError {
    #[error("fraction {0} outside [0, 100]")]
    Fraction(String),
    #[error("{mode} rows cannot hold the selected pages: need {required} bytes, have {available}")]
    CapacityOverflow {
        mode: &'static str,
        required: u64,
        available: u64,
    },
}

/// Where every touched page lives.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementPlan {
    pub fraction: f64,
    pub hp_pages: BTreeSet<u64>,
    /// High-performance groups form the prefix `0..hp_groups`.
    pub hp_groups: u64,
    pub frames: HashMap<u64, u64>,
    pub page_bits: u32,
}

/// Number of groups switched to high-performance mode for `fraction` percent.
pub fn hp_group_count(groups: u64, fraction: f64) -> u64 {
    ((groups as f64 * fraction / 100.0).ceil() as u64).min(groups)
}

/// Picks the hottest `ceil(fraction% x touched)` pages for high-performance
/// rows and assigns every page a frame. Pages fill their region's frames in
/// ascending page order; a high-performance group only offers half of its
/// frames.
pub fn plan_placement(
    profile: &PageProfile,
    fraction: f64,
    geometry: &GroupGeometry,
) -> Result<PlacementPlan, PlacementError> {
    if !(0.0..=100.0).contains(&fraction) {
        return Err(PlacementError::Fraction(fraction.to_string()));
    }
    let touched = profile.touched();
    let n_hp = ((touched as f64 * fraction / 100.0).ceil() as usize).min(touched);
    let hp_pages: BTreeSet<u64> = profile.ranked().into_iter().take(n_hp).map(|(p, _)| p).collect();
    let hp_groups = hp_group_count(geometry.groups(), fraction);
    let page_bytes = 1u64 << geometry.page_bits();

    let hp_slots = hp_groups * geometry.hp_frames_per_group();
    let mc_slots = (geometry.groups() - hp_groups) * geometry.frames_per_group();
    let mc_count = (touched - n_hp) as u64;
    if n_hp as u64 > hp_slots {
        return Err(PlacementError::CapacityOverflow {
            mode: "high-performance",
            required: n_hp as u64 * page_bytes,
            available: hp_slots * page_bytes,
        });
    }
    if mc_count > mc_slots {
        return Err(PlacementError::CapacityOverflow {
            mode: "max-capacity",
            required: mc_count * page_bytes,
            available: mc_slots * page_bytes,
        });
    }

    let mut frames = HashMap::with_capacity(touched);
    let hpf = geometry.hp_frames_per_group();
    for (i, p) in hp_pages.iter().enumerate() {
        let i = i as u64;
        frames.insert(*p, geometry.frame_of(i / hpf, i % hpf));
    }
    let fpg = geometry.frames_per_group();
    let mc = profile.counts.keys().filter(|p| !hp_pages.contains(p));
    for (i, p) in mc.enumerate() {
        let i = i as u64;
        frames.insert(*p, geometry.frame_of(hp_groups + i / fpg, i % fpg));
    }
    Ok(PlacementPlan {
        fraction,
        hp_pages,
        hp_groups,
        frames,
        page_bits: geometry.page_bits(),
    })
}

impl PlacementPlan {
    /// Physical address of byte `offset` inside page `key`, if placed.
    pub fn translate(&self, key: u64, offset: u64) -> Option<u64> {
        self.frames.get(&key).map(|f| (f << self.page_bits) | offset)
    }

    pub fn mode_of(&self, page: u64) -> RowMode {
        if self.hp_pages.contains(&page) {
            RowMode::HighPerformance
        } else {
            RowMode::MaxCapacity
        }
    }

    /// `page,mode,row_group` rows in ascending page order.
    pub fn write_csv<W: Write>(&self, out: W, geometry: &GroupGeometry) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["page", "mode", "row_group"])?;
        let mut pages: Vec<_> = self.frames.iter().collect();
        pages.sort();
        for (page, frame) in pages {
            w.write_record([
                page.to_string(),
                self.mode_of(*page).as_str().to_string(),
                geometry.group_of_frame(*frame).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Last-level-cache misses per thousand instructions.
pub fn mpki(misses: u64, instructions: u64) -> f64 {
    if instructions == 0 {
        0.0
    } else {
        misses as f64 * 1000.0 / instructions as f64
    }
}

pub const MEMORY_INTENSIVE_MPKI: f64 = 2.0;

pub fn is_memory_intensive(mpki: f64) -> bool {
    mpki > MEMORY_INTENSIVE_MPKI
}
