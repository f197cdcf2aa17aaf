#![allow(dead_code)]

pub mod oracle;

use clr_sim::controller::ReqKind;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Interleaved random and streaming physical requests over `capacity` bytes.
pub fn mixed_requests(seed: u64, n: usize, capacity: u64, write_fraction: f64) -> Vec<(ReqKind, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = capacity / 64;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let burst = rng.random_range(16..256usize).min(n - out.len());
        let streaming = rng.random_bool(0.5);
        let mut line = rng.random_range(0..lines);
        for _ in 0..burst {
            let kind = if rng.random_bool(write_fraction) { ReqKind::Write } else { ReqKind::Read };
            out.push((kind, line * 64));
            line = if streaming { (line + 1) % lines } else { rng.random_range(0..lines) };
        }
    }
    out
}
