//! Bit-sliced physical address interleaving.
//!
//! A map is an ordered list of `(field, bits)` segments starting at the least
//! significant address bit. A field may appear in several segments; its value
//! is assembled from them in order of appearance, low bits first. This is
//! enough to express interleavings where part of the column index comes from
//! the page offset and part from the page number.

use std::fmt;

use thiserror::Error;

use crate::dram::DramTopology;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AddressError {
    #[error("address {addr:#x} outside the {width}-bit physical address space")]
    AddressOutOfRange { addr: u64, width: u32 },
    #[error("coordinate {field} index {value} exceeds dimension {limit}")]
    CoordOutOfRange {
        field: Field,
        value: u64,
        limit: u64,
    },
    #[error("malformed address map segment `{0}`")]
    BadSegment(String),
    #[error("unknown address field `{0}`")]
    UnknownField(String),
    #[error("field {field} has {got} bits in the map but the topology needs {want}")]
    FieldWidth { field: Field, got: u32, want: u32 },
    #[error("only one `*` segment is allowed and it must leave a non-negative width")]
    BadWildcard,
    #[error("page size {0} is not a power of two")]
    PageSize(u64),
    #[error("address map is not bijective: {0}")]
    NotBijective(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Channel,
    Rank,
    BankGroup,
    Bank,
    Row,
    Column,
    Byte,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Channel,
        Field::Rank,
        Field::BankGroup,
        Field::Bank,
        Field::Row,
        Field::Column,
        Field::Byte,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn parse(s: &str) -> Result<Self, AddressError> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "channel" | "ch" => Field::Channel,
            "rank" | "ra" => Field::Rank,
            "bankgroup" | "bg" => Field::BankGroup,
            "bank" | "ba" => Field::Bank,
            "row" | "ro" => Field::Row,
            "column" | "col" | "co" => Field::Column,
            "byte" | "by" => Field::Byte,
            other => return Err(AddressError::UnknownField(other.to_string())),
        })
    }

    fn name(self) -> &'static str {
        match self {
            Field::Channel => "channel",
            Field::Rank => "rank",
            Field::BankGroup => "bankgroup",
            Field::Bank => "bank",
            Field::Row => "row",
            Field::Column => "column",
            Field::Byte => "byte",
        }
    }

    fn dimension(self, topo: &DramTopology) -> u64 {
        match self {
            Field::Channel => topo.channels,
            Field::Rank => topo.ranks_per_channel,
            Field::BankGroup => topo.bankgroups_per_rank,
            Field::Bank => topo.banks_per_bankgroup,
            Field::Row => topo.rows_per_bank(),
            Field::Column => topo.columns_per_row,
            Field::Byte => topo.bytes_per_column,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Location of a byte inside the DRAM hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DramCoord {
    pub channel: u32,
    pub rank: u32,
    pub bankgroup: u32,
    pub bank: u32,
    pub row: u32,
    pub column: u32,
    pub byte: u32,
}

impl DramCoord {
    fn get(&self, field: Field) -> u64 {
        (match field {
            Field::Channel => self.channel,
            Field::Rank => self.rank,
            Field::BankGroup => self.bankgroup,
            Field::Bank => self.bank,
            Field::Row => self.row,
            Field::Column => self.column,
            Field::Byte => self.byte,
        }) as u64
    }

    fn set(&mut self, field: Field, value: u64) {
        let v = value as u32;
        match field {
            Field::Channel => self.channel = v,
            Field::Rank => self.rank = v,
            Field::BankGroup => self.bankgroup = v,
            Field::Bank => self.bank = v,
            Field::Row => self.row = v,
            Field::Column => self.column = v,
            Field::Byte => self.byte = v,
        }
    }

    /// Bank index within its rank.
    pub fn flat_bank(&self, topo: &DramTopology) -> usize {
        (self.bankgroup as u64 * topo.banks_per_bankgroup + self.bank as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Segment {
    field: Field,
    /// Least significant address bit of this segment.
    lsb: u32,
    bits: u32,
    /// Bit offset of this segment inside the field value.
    field_shift: u32,
}

/// Bijective mapping between physical addresses and [`DramCoord`]s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressMap {
    segments: Vec<Segment>,
    width: u32,
    dims: [u64; 7],
    page_offset_bits: u32,
}

/// Within-row and across-row striping of pages induced by a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageStriping {
    /// Page-number bits that select a position inside a row (X).
    pub in_row_page_bits: u32,
    /// Page-offset bits that select a row (Y).
    pub row_offset_bits: u32,
}

impl PageStriping {
    pub fn pages_per_row(&self) -> u64 {
        1 << self.in_row_page_bits
    }

    pub fn rows_per_page(&self) -> u64 {
        1 << self.row_offset_bits
    }
}

impl AddressMap {
    /// The default interleaving: cacheline bytes, column, bank group, bank,
    /// then row in the most significant bits.
    pub const DEFAULT_SPEC: &'static str =
        "byte:6, column:7, bankgroup:2, bank:2, rank:0, channel:0, row:*";

    /// Parses a map of the form `byte:6, column:4, bank:2, row:*`. `*` stands
    /// for all remaining address bits; fields absent from the list get zero bits.
    pub fn parse(spec: &str, topo: &DramTopology, page_size: u64) -> Result<Self, AddressError> {
        let width = topo.address_bits();
        let mut raw = Vec::new();
        let mut wildcard = None;
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, bits) = part
                .split_once(':')
                .ok_or_else(|| AddressError::BadSegment(part.to_string()))?;
            let field = Field::parse(name)?;
            let bits = bits.trim();
            if bits == "*" {
                if wildcard.is_some() {
                    return Err(AddressError::BadWildcard);
                }
                wildcard = Some(raw.len());
                raw.push((field, 0u32));
            } else {
                let n: u32 = bits
                    .parse()
                    .map_err(|_| AddressError::BadSegment(part.to_string()))?;
                raw.push((field, n));
            }
        }
        if let Some(i) = wildcard {
            let used: u32 = raw.iter().map(|(_, b)| *b).sum();
            if used > width {
                return Err(AddressError::BadWildcard);
            }
            raw[i].1 = width - used;
        }
        Self::from_segments(&raw, topo, page_size)
    }

    /// Builds a map from explicit `(field, bits)` segments, LSB first.
    pub fn from_segments(
        raw: &[(Field, u32)],
        topo: &DramTopology,
        page_size: u64,
    ) -> Result<Self, AddressError> {
        let map = Self::assemble(raw, topo, page_size)?;
        map.validate()?;
        Ok(map)
    }

    fn assemble(
        raw: &[(Field, u32)],
        topo: &DramTopology,
        page_size: u64,
    ) -> Result<Self, AddressError> {
        if page_size == 0 || !page_size.is_power_of_two() {
            return Err(AddressError::PageSize(page_size));
        }
        let mut dims = [0u64; 7];
        for f in Field::ALL {
            dims[f.index()] = f.dimension(topo);
        }
        let mut shifts = [0u32; 7];
        let mut lsb = 0;
        let mut segments = Vec::new();
        for &(field, bits) in raw {
            if bits == 0 {
                continue;
            }
            segments.push(Segment {
                field,
                lsb,
                bits,
                field_shift: shifts[field.index()],
            });
            shifts[field.index()] += bits;
            lsb += bits;
        }
        Ok(Self {
            segments,
            width: lsb,
            dims,
            page_offset_bits: page_size.trailing_zeros(),
        })
    }

    /// Checks that every address bit is used exactly once and every field
    /// receives exactly log2 of its dimension.
    pub fn validate(&self) -> Result<(), AddressError> {
        let mut used = 0u128;
        for s in &self.segments {
            for b in s.lsb..s.lsb + s.bits {
                if b >= 128 || used & (1 << b) != 0 {
                    return Err(AddressError::NotBijective(format!("bit {b} reused")));
                }
                used |= 1 << b;
            }
        }
        let expected_width: u32 = self.dims.iter().map(|d| d.trailing_zeros()).sum();
        if self.width != expected_width {
            return Err(AddressError::NotBijective(format!(
                "map covers {} bits, topology needs {expected_width}",
                self.width
            )));
        }
        for f in Field::ALL {
            let got: u32 = self
                .segments
                .iter()
                .filter(|s| s.field == f)
                .map(|s| s.bits)
                .sum();
            let want = self.dims[f.index()].trailing_zeros();
            if got != want {
                return Err(AddressError::FieldWidth { field: f, got, want });
            }
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn page_offset_bits(&self) -> u32 {
        self.page_offset_bits
    }

    pub fn page_size(&self) -> u64 {
        1 << self.page_offset_bits
    }

    pub fn decode(&self, addr: u64) -> Result<DramCoord, AddressError> {
        if self.width < 64 && addr >> self.width != 0 {
            return Err(AddressError::AddressOutOfRange {
                addr,
                width: self.width,
            });
        }
        Ok(self.decode_unchecked(addr))
    }

    /// Decodes without the range check; bits above the map width are ignored.
    pub fn decode_unchecked(&self, addr: u64) -> DramCoord {
        let mut coord = DramCoord::default();
        let mut vals = [0u64; 7];
        for s in &self.segments {
            let v = (addr >> s.lsb) & ((1u64 << s.bits) - 1);
            vals[s.field.index()] |= v << s.field_shift;
        }
        for f in Field::ALL {
            coord.set(f, vals[f.index()]);
        }
        coord
    }

    pub fn encode(&self, coord: &DramCoord) -> Result<u64, AddressError> {
        for f in Field::ALL {
            let value = coord.get(f);
            let limit = self.dims[f.index()];
            if value >= limit {
                return Err(AddressError::CoordOutOfRange {
                    field: f,
                    value,
                    limit,
                });
            }
        }
        Ok(self.encode_unchecked(coord))
    }

    pub fn encode_unchecked(&self, coord: &DramCoord) -> u64 {
        let mut addr = 0;
        for s in &self.segments {
            let v = (coord.get(s.field) >> s.field_shift) & ((1u64 << s.bits) - 1);
            addr |= v << s.lsb;
        }
        addr
    }

    /// X and Y for this map's page size: page-number bits feeding the
    /// within-row position, and page-offset bits feeding the row index.
    pub fn striping(&self) -> PageStriping {
        self.striping_for(self.page_offset_bits)
    }

    /// Striping for an arbitrary page size of `2^page_offset_bits` bytes.
    pub fn striping_for(&self, page_offset_bits: u32) -> PageStriping {
        let p = page_offset_bits;
        let mut in_row = 0;
        let mut row = 0;
        for s in &self.segments {
            let below = p.saturating_sub(s.lsb).min(s.bits);
            let above = s.bits - below;
            match s.field {
                Field::Column | Field::Byte => in_row += above,
                Field::Row => row += below,
                _ => {}
            }
        }
        PageStriping {
            in_row_page_bits: in_row,
            row_offset_bits: row,
        }
    }

    /// How many pages share one row.
    pub fn pages_per_row(&self) -> u64 {
        self.striping().pages_per_row()
    }

    /// How many rows one page is striped across.
    pub fn rows_per_page(&self) -> u64 {
        self.striping().rows_per_page()
    }

    /// Page-number bit positions (relative to the page number) that select a
    /// position inside a row, in ascending order.
    pub fn in_row_page_bit_positions(&self) -> Vec<u32> {
        let p = self.page_offset_bits;
        let mut out = Vec::new();
        for s in &self.segments {
            if matches!(s.field, Field::Column | Field::Byte) {
                for b in s.lsb..s.lsb + s.bits {
                    if b >= p {
                        out.push(b - p);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Renders the map back to its textual form.
    pub fn spec_string(&self) -> String {
        self.segments
            .iter()
            .map(|s| format!("{}:{}", s.field, s.bits))
            .collect::<Vec<_>>()
            .join(", ")
    }

    #[doc(hidden)]
    pub fn from_segments_unchecked(
        raw: &[(Field, u32)],
        topo: &DramTopology,
        page_size: u64,
    ) -> Result<Self, AddressError> {
        Self::assemble(raw, topo, page_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_topo() -> DramTopology {
        // 2^20 bytes: byte 6, column 4, bank 2, bankgroup 2, row 6.
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
    fn zero_and_single_bit() {
        let t = small_topo();
        let m = AddressMap::parse(
            "byte:6, column:4, bank:2, bankgroup:2, rank:0, channel:0, row:*",
            &t,
            4096,
        )
        .unwrap();
        assert_eq!(m.width(), 20);
        assert_eq!(m.decode(0).unwrap(), DramCoord::default());
        let c = m.decode(1 << 6).unwrap();
        assert_eq!(
            c,
            DramCoord {
                column: 1,
                ..Default::default()
            }
        );
        assert_eq!(m.encode(&DramCoord::default()).unwrap(), 0);
    }

    #[test]
    fn default_map_striping() {
        let t = DramTopology::default();
        let m = AddressMap::parse(AddressMap::DEFAULT_SPEC, &t, 4096).unwrap();
        assert_eq!(m.width(), 34);
        let s = m.striping();
        assert_eq!((s.in_row_page_bits, s.row_offset_bits), (1, 0));
        assert_eq!(m.pages_per_row(), 2);
        assert_eq!(m.rows_per_page(), 1);
        assert_eq!(m.in_row_page_bit_positions(), vec![0]);
    }

    #[test]
    fn striping_examples() {
        let t = small_topo();
        // Column bits 6..13 with page offset 12: three column bits come from the page number.
        let m = AddressMap::parse("byte:6, column:4, bank:2, bankgroup:2, row:*", &t, 1024).unwrap();
        assert_eq!(m.striping().in_row_page_bits, 0);
        let m = AddressMap::parse("byte:6, column:4, bank:2, bankgroup:2, row:*", &t, 512).unwrap();
        assert_eq!(m.pages_per_row(), 2);
        let m = AddressMap::parse("byte:6, column:1, row:2, column:3, bank:2, bankgroup:2, row:*", &t, 512)
            .unwrap();
        assert_eq!(m.striping(), PageStriping { in_row_page_bits: 3, row_offset_bits: 2 });
        assert_eq!(m.pages_per_row(), 8);
        assert_eq!(m.rows_per_page(), 4);
    }

    #[test]
    fn rejects_bad_maps() {
        let t = small_topo();
        assert!(matches!(
            AddressMap::parse("byte:6, column:3, bank:2, bankgroup:2, row:*", &t, 4096),
            Err(AddressError::FieldWidth { .. })
        ));
        assert!(AddressMap::parse("byte:6, column:4, bank:2, bankgroup:2, row:6, row:*", &t, 4096).is_ok());
        assert!(matches!(
            AddressMap::parse("byte:6, column:4, bank:2, bankgroup:2, row:*, rank:*", &t, 4096),
            Err(AddressError::BadWildcard)
        ));
        assert!(matches!(
            AddressMap::parse("byte6, row:*", &t, 4096),
            Err(AddressError::BadSegment(_))
        ));
        assert!(matches!(
            AddressMap::parse("bytes:6, row:*", &t, 4096),
            Err(AddressError::UnknownField(_))
        ));
        assert_eq!(
            AddressMap::parse(AddressMap::DEFAULT_SPEC, &t, 3000),
            Err(AddressError::PageSize(3000))
        );
    }

    #[test]
    fn out_of_range() {
        let t = small_topo();
        let m = AddressMap::parse("byte:6, column:4, bank:2, bankgroup:2, row:*", &t, 4096).unwrap();
        assert!(matches!(m.decode(1 << 20), Err(AddressError::AddressOutOfRange { .. })));
        let c = DramCoord {
            row: 64,
            ..Default::default()
        };
        assert!(matches!(
            m.encode(&c),
            Err(AddressError::CoordOutOfRange { field: Field::Row, .. })
        ));
    }

    #[test]
    fn exhaustive_round_trip_small() {
        let t = small_topo();
        let m = AddressMap::parse("byte:6, column:2, bankgroup:2, column:2, bank:2, row:*", &t, 4096)
            .unwrap();
        for a in 0..(1u64 << 20) {
            assert_eq!(m.encode(&m.decode(a).unwrap()).unwrap(), a);
        }
    }

    proptest::proptest! {
        #[test]
        fn default_map_round_trips(addr in 0u64..(1 << 34)) {
            let t = DramTopology::default();
            let m = AddressMap::parse(AddressMap::DEFAULT_SPEC, &t, 4096).unwrap();
            let c = m.decode(addr).unwrap();
            proptest::prop_assert_eq!(m.encode(&c).unwrap(), addr);
        }

        #[test]
        fn page_lines_are_distinct(page_bits in 6u32..17, page in 0u64..1024) {
            let t = DramTopology::default();
            let m = AddressMap::parse(AddressMap::DEFAULT_SPEC, &t, 1 << page_bits).unwrap();
            let base = page << page_bits;
            let coords: std::collections::HashSet<_> =
                (0..m.page_size() / 64).map(|i| m.decode(base + i * 64).unwrap()).collect();
            proptest::prop_assert_eq!(coords.len() as u64, m.page_size() / 64);
        }
    }
}
