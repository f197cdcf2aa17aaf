use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("topology field `{field}` must be a power of two >= 1, got {value}")]
    NotPowerOfTwo { field: &'static str, value: u64 },
    #[error("bus frequency must be positive")]
    ZeroBusFrequency,
}

/// Physical organization of the simulated memory system.
///
/// Every count must be a power of two so that addresses can be bit-sliced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DramTopology {
    pub channels: u64,
    pub ranks_per_channel: u64,
    pub bankgroups_per_rank: u64,
    pub banks_per_bankgroup: u64,
    pub subarrays_per_bank: u64,
    pub rows_per_subarray: u64,
    pub columns_per_row: u64,
    pub bytes_per_column: u64,
    pub bus_mhz: u64,
}

impl Default for DramTopology {
    /// One channel, one rank of 16 Gb x8 DDR4 chips (16 GiB), 4 bank groups of 4 banks,
    /// 8 KiB rows, 64-byte column bursts, 1200 MHz bus.
    fn default() -> Self {
        Self {
            channels: 1,
            ranks_per_channel: 1,
            bankgroups_per_rank: 4,
            banks_per_bankgroup: 4,
            subarrays_per_bank: 256,
            rows_per_subarray: 512,
            columns_per_row: 128,
            bytes_per_column: 64,
            bus_mhz: 1200,
        }
    }
}

impl DramTopology {
    pub fn validate(&self) -> Result<(), TopologyError> {
        for (field, value) in self.dimensions() {
            if value == 0 || !value.is_power_of_two() {
                return Err(TopologyError::NotPowerOfTwo { field, value });
            }
        }
        if self.bus_mhz == 0 {
            return Err(TopologyError::ZeroBusFrequency);
        }
        Ok(())
    }

    fn dimensions(&self) -> [(&'static str, u64); 8] {
        [
            ("channels", self.channels),
            ("ranks_per_channel", self.ranks_per_channel),
            ("bankgroups_per_rank", self.bankgroups_per_rank),
            ("banks_per_bankgroup", self.banks_per_bankgroup),
            ("subarrays_per_bank", self.subarrays_per_bank),
            ("rows_per_subarray", self.rows_per_subarray),
            ("columns_per_row", self.columns_per_row),
            ("bytes_per_column", self.bytes_per_column),
        ]
    }

    pub fn rows_per_bank(&self) -> u64 {
        self.subarrays_per_bank * self.rows_per_subarray
    }

    pub fn banks_per_rank(&self) -> u64 {
        self.bankgroups_per_rank * self.banks_per_bankgroup
    }

    pub fn rows_per_rank(&self) -> u64 {
        self.banks_per_rank() * self.rows_per_bank()
    }

    pub fn total_rows(&self) -> u64 {
        self.channels * self.ranks_per_channel * self.rows_per_rank()
    }

    pub fn row_bytes(&self) -> u64 {
        self.columns_per_row * self.bytes_per_column
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.total_rows() * self.row_bytes()
    }

    /// Width of the physical address in bits.
    pub fn address_bits(&self) -> u32 {
        self.capacity_bytes().trailing_zeros()
    }

    /// Memory clock period in nanoseconds.
    pub fn tck_ns(&self) -> f64 {
        1000.0 / self.bus_mhz as f64
    }

    pub fn subarray_of(&self, row: u64) -> u64 {
        row / self.rows_per_subarray
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_16_gib() {
        let t = DramTopology::default();
        t.validate().unwrap();
        assert_eq!(t.capacity_bytes(), 16 << 30);
        assert_eq!(t.address_bits(), 34);
        assert_eq!(t.row_bytes(), 8192);
        assert_eq!(t.banks_per_rank(), 16);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let t = DramTopology {
            banks_per_bankgroup: 3,
            ..Default::default()
        };
        assert_eq!(
            t.validate(),
            Err(TopologyError::NotPowerOfTwo {
                field: "banks_per_bankgroup",
                value: 3
            })
        );
        let t = DramTopology {
            channels: 0,
            ..Default::default()
        };
        assert!(t.validate().is_err());
    }
}
