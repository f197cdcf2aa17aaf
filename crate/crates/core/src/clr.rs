//! Capacity-latency reconfiguration control.
//!
//! Every subarray has two bitline mode select transistors, ISO1 and ISO2.
//! Their settings decide whether a row's cells are sensed individually
//! (max-capacity) or as coupled pairs through two sense amplifiers
//! (high-performance). Rows are grouped into reconfiguration groups whose size
//! follows from the address interleaving; a group switches mode as a unit.

use thiserror::Error;

use crate::address::{AddressError, AddressMap, DramCoord};
use crate::dram::{DramTopology, RowMode};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClrError {
    #[error("cannot switch group {group}: a row in it is open")]
    SwitchWhileOpen { group: u64 },
    #[error("group {group} out of range ({groups} groups)")]
    GroupOutOfRange { group: u64, groups: u64 },
    #[error(
        "address map gives no page-number bits inside a row; a page would be smaller than \
         half a high-performance row"
    )]
    SubPageGranularity,
    #[error(transparent)]
    Address(#[from] AddressError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubarrayParity {
    Even,
    Odd,
}

impl SubarrayParity {
    pub fn of(subarray: u64) -> Self {
        if subarray % 2 == 0 {
            SubarrayParity::Even
        } else {
            SubarrayParity::Odd
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IsoAssignment {
    pub iso1: bool,
    pub iso2: bool,
    pub subarray_parity: SubarrayParity,
}

/// ISO1/ISO2 settings needed to activate a row of the given subarray parity in `mode`.
///
/// Max-capacity connects each bitline to one sense amplifier (ISO1 on, ISO2
/// off) regardless of parity. High-performance couples both sense amplifiers
/// onto the bitline pair: odd subarrays assert both transistors, even
/// subarrays deassert both.
pub fn iso_signals(parity: SubarrayParity, mode: RowMode) -> IsoAssignment {
    let (iso1, iso2) = match (mode, parity) {
        (RowMode::MaxCapacity, _) => (true, false),
        (RowMode::HighPerformance, SubarrayParity::Odd) => (true, true),
        (RowMode::HighPerformance, SubarrayParity::Even) => (false, false),
    };
    IsoAssignment {
        iso1,
        iso2,
        subarray_parity: parity,
    }
}

/// Reconfiguration unit implied by an address map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Granularity {
    /// Pages that become low-latency when one page is placed in high-performance rows.
    pub low_latency_pages: u64,
    /// Rows that switch mode together.
    pub rows_switched: u64,
}

/// Low-latency pages and switched rows for a reconfiguration request.
///
/// With X page-number bits selecting a position inside a row and Y
/// page-offset bits selecting the row, switching one page's rows to
/// high-performance mode makes ½·2^X pages low-latency and switches 2^Y rows.
/// X = 0 would give half a page and is rejected.
pub fn reconfig_granularity(map: &AddressMap, page_size: u64) -> Result<Granularity, ClrError> {
    map.validate()?;
    if page_size == 0 || !page_size.is_power_of_two() {
        return Err(AddressError::PageSize(page_size).into());
    }
    let s = map.striping_for(page_size.trailing_zeros());
    if s.in_row_page_bits == 0 {
        return Err(ClrError::SubPageGranularity);
    }
    Ok(Granularity {
        low_latency_pages: 1 << (s.in_row_page_bits - 1),
        rows_switched: 1 << s.row_offset_bits,
    })
}

/// Row-group geometry of an address map: how page frames and rows fold into
/// reconfiguration groups.
///
/// A group is the set of frames whose page numbers differ only in the
/// within-row bits. Group ids are the page number with those bits squeezed out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupGeometry {
    page_bits: u32,
    in_row_bits: Vec<u32>,
    groups: u64,
    rows_per_group: u64,
    row_bytes: u64,
    total_rows: u64,
}

impl GroupGeometry {
    pub fn new(map: &AddressMap, topo: &DramTopology) -> Result<Self, ClrError> {
        reconfig_granularity(map, map.page_size())?;
        let in_row_bits = map.in_row_page_bit_positions();
        let frames = topo.capacity_bytes() >> map.page_offset_bits();
        let groups = frames >> in_row_bits.len();
        Ok(Self {
            page_bits: map.page_offset_bits(),
            groups,
            rows_per_group: topo.total_rows() / groups,
            row_bytes: topo.row_bytes(),
            total_rows: topo.total_rows(),
            in_row_bits,
        })
    }

    pub fn groups(&self) -> u64 {
        self.groups
    }

    pub fn rows_per_group(&self) -> u64 {
        self.rows_per_group
    }

    pub fn frames_per_group(&self) -> u64 {
        1 << self.in_row_bits.len()
    }

    /// Frames of a group still usable once it runs in high-performance mode.
    pub fn hp_frames_per_group(&self) -> u64 {
        self.frames_per_group() / 2
    }

    pub fn page_bits(&self) -> u32 {
        self.page_bits
    }

    pub fn total_rows(&self) -> u64 {
        self.total_rows
    }

    pub fn row_bytes(&self) -> u64 {
        self.row_bytes
    }

    pub fn group_of_frame(&self, frame: u64) -> u64 {
        let mut out = 0;
        let mut o = 0;
        let mut removed = self.in_row_bits.iter().peekable();
        let mut b = 0;
        let mut f = frame;
        while f != 0 {
            if removed.peek() == Some(&&b) {
                removed.next();
            } else {
                out |= (f & 1) << o;
                o += 1;
            }
            f >>= 1;
            b += 1;
        }
        out
    }

    /// Frame number of the `index`-th frame inside `group`.
    pub fn frame_of(&self, group: u64, index: u64) -> u64 {
        let mut frame = 0;
        let mut g = group;
        let mut idx = index;
        let mut removed = self.in_row_bits.iter().peekable();
        let mut b = 0;
        while g != 0 || idx != 0 {
            if removed.peek() == Some(&&b) {
                removed.next();
                frame |= (idx & 1) << b;
                idx >>= 1;
            } else {
                frame |= (g & 1) << b;
                g >>= 1;
            }
            b += 1;
        }
        frame
    }

    pub fn group_of_addr(&self, addr: u64) -> u64 {
        self.group_of_frame(addr >> self.page_bits)
    }

    pub fn group_of_coord(&self, map: &AddressMap, coord: &DramCoord) -> u64 {
        self.group_of_addr(map.encode_unchecked(coord))
    }
}

/// Per-group operating modes and the resulting capacity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowModeTable {
    modes: Vec<RowMode>,
    rows_per_group: u64,
    row_bytes: u64,
    hp_groups: u64,
}

impl RowModeTable {
    /// All groups in max-capacity mode.
    pub fn new(geometry: &GroupGeometry) -> Self {
        Self {
            modes: vec![RowMode::MaxCapacity; geometry.groups() as usize],
            rows_per_group: geometry.rows_per_group(),
            row_bytes: geometry.row_bytes(),
            hp_groups: 0,
        }
    }

    /// Groups `0..n` in high-performance mode, the rest in max-capacity mode.
    pub fn with_hp_prefix(geometry: &GroupGeometry, n: u64) -> Self {
        let mut t = Self::new(geometry);
        let n = n.min(t.groups());
        for m in &mut t.modes[..n as usize] {
            *m = RowMode::HighPerformance;
        }
        t.hp_groups = n;
        t
    }

    pub fn groups(&self) -> u64 {
        self.modes.len() as u64
    }

    pub fn mode(&self, group: u64) -> RowMode {
        self.modes[group as usize]
    }

    pub fn hp_groups(&self) -> u64 {
        self.hp_groups
    }

    pub fn hp_rows(&self) -> u64 {
        self.hp_groups * self.rows_per_group
    }

    pub fn total_rows(&self) -> u64 {
        self.groups() * self.rows_per_group
    }

    pub fn rows_per_group(&self) -> u64 {
        self.rows_per_group
    }

    pub fn total_capacity_bytes(&self) -> u64 {
        self.total_rows() * self.row_bytes
    }

    /// Usable bytes: high-performance rows hold half of their raw capacity.
    pub fn capacity_bytes(&self) -> u64 {
        self.total_capacity_bytes() - self.hp_rows() * self.row_bytes / 2
    }

    /// Capacity as a percentage of an all-max-capacity device.
    pub fn capacity_percent(&self) -> f64 {
        100.0 - 50.0 * self.hp_rows() as f64 / self.total_rows() as f64
    }

    /// Switches one group. `open_groups` lists the groups that currently have
    /// an open row anywhere; switching any of them is refused.
    pub fn set_group_mode(
        &mut self,
        group: u64,
        mode: RowMode,
        open_groups: impl IntoIterator<Item = u64>,
    ) -> Result<(), ClrError> {
        if group >= self.groups() {
            return Err(ClrError::GroupOutOfRange {
                group,
                groups: self.groups(),
            });
        }
        if open_groups.into_iter().any(|g| g == group) {
            return Err(ClrError::SwitchWhileOpen { group });
        }
        let old = std::mem::replace(&mut self.modes[group as usize], mode);
        match (old, mode) {
            (RowMode::MaxCapacity, RowMode::HighPerformance) => self.hp_groups += 1,
            (RowMode::HighPerformance, RowMode::MaxCapacity) => self.hp_groups -= 1,
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::Field;

    fn small_topo() -> DramTopology {
        DramTopology {
            channels: 1,
            ranks_per_channel: 1,
            bankgroups_per_rank: 4,
            banks_per_bankgroup: 4,
            subarrays_per_bank: 2,
            rows_per_subarray: 32,
            columns_per_row: 16,
            bytes_per_column: 64,
            bus_mhz: 1200,
        }
    }

    #[test]
    fn iso_truth_table() {
        use RowMode::*;
        use SubarrayParity::*;
        let pairs = |p, m| {
            let a = iso_signals(p, m);
            (a.iso1, a.iso2)
        };
        assert_eq!(pairs(Odd, MaxCapacity), (true, false));
        assert_eq!(pairs(Even, MaxCapacity), (true, false));
        assert_eq!(pairs(Odd, HighPerformance), (true, true));
        assert_eq!(pairs(Even, HighPerformance), (false, false));
        assert_eq!(iso_signals(Odd, MaxCapacity).subarray_parity, Odd);
        assert_eq!(SubarrayParity::of(3), Odd);
    }

    #[test]
    fn granularity_examples() {
        let t = small_topo();
        // X = 3, Y = 1
        let m = AddressMap::parse("byte:6, column:1, row:1, column:3, bank:2, bankgroup:2, row:*", &t, 256)
            .unwrap();
        assert_eq!(
            reconfig_granularity(&m, 256).unwrap(),
            Granularity {
                low_latency_pages: 4,
                rows_switched: 2
            }
        );
        // X = 1, Y = 0
        let m = AddressMap::parse("byte:6, column:4, bank:2, bankgroup:2, row:*", &t, 512).unwrap();
        assert_eq!(
            reconfig_granularity(&m, 512).unwrap(),
            Granularity {
                low_latency_pages: 1,
                rows_switched: 1
            }
        );
        // X = 0
        assert_eq!(reconfig_granularity(&m, 1024), Err(ClrError::SubPageGranularity));
    }

    #[test]
    fn granularity_rejects_non_bijective_map() {
        let t = small_topo();
        let m = AddressMap::from_segments_unchecked(
            &[(Field::Byte, 6), (Field::Column, 4), (Field::Row, 6)],
            &t,
            512,
        )
        .unwrap();
        assert!(matches!(
            reconfig_granularity(&m, 512),
            Err(ClrError::Address(_))
        ));
    }

    #[test]
    fn frame_group_round_trip() {
        let t = small_topo();
        let m = AddressMap::parse("byte:6, column:1, row:1, column:3, bank:2, bankgroup:2, row:*", &t, 256)
            .unwrap();
        let g = GroupGeometry::new(&m, &t).unwrap();
        assert_eq!(g.frames_per_group(), 8);
        assert_eq!(g.groups() * 8, (1 << 20) / 256);
        assert_eq!(g.rows_per_group(), 2);
        for frame in 0..(1u64 << 12) {
            let grp = g.group_of_frame(frame);
            let idx = (0..8).find(|&i| g.frame_of(grp, i) == frame);
            assert!(idx.is_some(), "frame {frame}");
        }
        // Frames of a group share their rows.
        for grp in [0u64, 5, 77] {
            let rows: std::collections::BTreeSet<_> = (0..8)
                .flat_map(|i| {
                    let base = g.frame_of(grp, i) << 8;
                    (0..256u64).step_by(64).map(move |o| base + o)
                })
                .map(|a| {
                    let c = m.decode(a).unwrap();
                    (c.bankgroup, c.bank, c.row)
                })
                .collect();
            assert_eq!(rows.len() as u64, g.rows_per_group());
        }
    }

    #[test]
    fn switching_updates_capacity() {
        let t = DramTopology::default();
        let m = AddressMap::parse(AddressMap::DEFAULT_SPEC, &t, 4096).unwrap();
        let g = GroupGeometry::new(&m, &t).unwrap();
        let mut table = RowModeTable::new(&g);
        assert_eq!(table.capacity_percent(), 100.0);
        table
            .set_group_mode(3, RowMode::HighPerformance, [])
            .unwrap();
        assert_eq!(table.hp_rows(), g.rows_per_group());
        assert_eq!(
            table.set_group_mode(9, RowMode::HighPerformance, [1, 9]),
            Err(ClrError::SwitchWhileOpen { group: 9 })
        );
        let quarter = RowModeTable::with_hp_prefix(&g, g.groups() / 4);
        assert_eq!(quarter.capacity_percent(), 87.5);
        assert_eq!(quarter.capacity_bytes(), t.capacity_bytes() / 8 * 7);
    }

    proptest::proptest! {
        #[test]
        fn capacity_loss_is_half_hp_share(switches in proptest::collection::vec((0u64..4096, proptest::bool::ANY), 0..200)) {
            let t = small_topo();
            let m = AddressMap::parse("byte:6, column:4, bank:2, bankgroup:2, row:*", &t, 512).unwrap();
            let g = GroupGeometry::new(&m, &t).unwrap();
            let mut table = RowModeTable::new(&g);
            for (grp, hp) in switches {
                let grp = grp % table.groups();
                let mode = if hp { RowMode::HighPerformance } else { RowMode::MaxCapacity };
                table.set_group_mode(grp, mode, []).unwrap();
            }
            let hp_share = table.hp_rows() as f64 / table.total_rows() as f64 * 100.0;
            proptest::prop_assert!(((100.0 - table.capacity_percent()) - hp_share / 2.0).abs() < 1e-9);
            let counted = (0..table.groups()).filter(|&i| table.mode(i) == RowMode::HighPerformance).count() as u64;
            proptest::prop_assert_eq!(counted, table.hp_groups());
        }
    }
}
