use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use thiserror::Error;

use super::TraceRecord;
use crate::controller::ReqKind;

pub const LINE_BYTES: u64 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("footprint of {footprint} bytes is smaller than one {page}-byte page")]
    Footprint { footprint: u64, page: u64 },
    #[error("write fraction {0} outside [0, 1]")]
    WriteFraction(f64),
    #[error("zipf exponent {0} must be positive")]
    Zipf(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceKind {
    #[default]
    Random,
    Stream,
    Zipf,
}

impl TraceKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(TraceKind::Random),
            "stream" => Some(TraceKind::Stream),
            "zipf" => Some(TraceKind::Zipf),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Random => "random",
            TraceKind::Stream => "stream",
            TraceKind::Zipf => "zipf",
        }
    }
}

/// Synthetic trace parameters. Bubble counts are drawn uniformly from
/// `bubbles_min..=bubbles_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub kind: TraceKind,
    pub seed: u64,
    pub records: usize,
    pub footprint: u64,
    pub bubbles_min: u64,
    pub bubbles_max: u64,
    pub write_fraction: f64,
    pub zipf_s: f64,
    pub page_size: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            kind: TraceKind::Random,
            seed: 1,
            records: 100_000,
            footprint: 64 << 20,
            bubbles_min: 0,
            bubbles_max: 20,
            write_fraction: 0.25,
            zipf_s: 1.0,
            page_size: 4096,
        }
    }
}

impl GenParams {
    fn check(&self) -> Result<(), GenError> {
        if self.footprint < self.page_size || self.footprint == 0 {
            return Err(GenError::Footprint {
                footprint: self.footprint,
                page: self.page_size,
            });
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return Err(GenError::WriteFraction(self.write_fraction));
        }
        if self.kind == TraceKind::Zipf && !(self.zipf_s > 0.0) {
            return Err(GenError::Zipf(self.zipf_s));
        }
        Ok(())
    }
}

fn record(rng: &mut ChaCha8Rng, p: &GenParams, addr: u64) -> TraceRecord {
    let bubbles = rng.random_range(p.bubbles_min..=p.bubbles_max.max(p.bubbles_min));
    let kind = if rng.random_bool(p.write_fraction) {
        ReqKind::Write
    } else {
        ReqKind::Read
    };
    TraceRecord { bubbles, addr, kind }
}

/// Uniformly random cachelines over the footprint.
pub fn gen_random(p: &GenParams) -> Result<Vec<TraceRecord>, GenError> {
    p.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let lines = p.footprint / LINE_BYTES;
    Ok((0..p.records)
        .map(|_| {
            let line = rng.random_range(0..lines);
            record(&mut rng, p, line * LINE_BYTES)
        })
        .collect())
}

/// Consecutive cachelines, wrapping at the end of the footprint.
pub fn gen_stream(p: &GenParams) -> Result<Vec<TraceRecord>, GenError> {
    p.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let lines = p.footprint / LINE_BYTES;
    Ok((0..p.records as u64)
        .map(|i| record(&mut rng, p, (i % lines) * LINE_BYTES))
        .collect())
}

/// Pages drawn from a Zipf distribution (hot pages scattered over the
/// footprint), with a uniformly random line inside the page.
pub fn gen_zipf(p: &GenParams) -> Result<Vec<TraceRecord>, GenError> {
    p.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let pages = p.footprint / p.page_size;
    let mut order: Vec<u64> = (0..pages).collect();
    order.shuffle(&mut rng);
    let zipf = Zipf::new(pages as f64, p.zipf_s).map_err(|_| GenError::Zipf(p.zipf_s))?;
    let lines_per_page = p.page_size / LINE_BYTES;
    Ok((0..p.records)
        .map(|_| {
            let rank = zipf.sample(&mut rng) as u64 - 1;
            let page = order[rank.min(pages - 1) as usize];
            let line = rng.random_range(0..lines_per_page);
            record(&mut rng, p, page * p.page_size + line * LINE_BYTES)
        })
        .collect())
}

pub fn generate(p: &GenParams) -> Result<Vec<TraceRecord>, GenError> {
    match p.kind {
        TraceKind::Random => gen_random(p),
        TraceKind::Stream => gen_stream(p),
        TraceKind::Zipf => gen_zipf(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let p = GenParams {
            seed: 7,
            records: 1000,
            ..Default::default()
        };
        assert_eq!(gen_random(&p).unwrap(), gen_random(&p).unwrap());
        let q = GenParams { seed: 8, ..p.clone() };
        assert_ne!(gen_random(&p).unwrap(), gen_random(&q).unwrap());
    }

    #[test]
    fn one_page_footprint() {
        let p = GenParams {
            footprint: 4096,
            records: 500,
            ..Default::default()
        };
        assert!(gen_random(&p).unwrap().iter().all(|r| r.addr < 4096));
    }

    #[test]
    fn zero_footprint_rejected() {
        let p = GenParams {
            footprint: 0,
            ..Default::default()
        };
        assert!(gen_random(&p).is_err());
        assert!(gen_stream(&p).is_err());
    }

    #[test]
    fn stream_is_contiguous() {
        let p = GenParams {
            kind: TraceKind::Stream,
            records: 300,
            footprint: 8192,
            ..Default::default()
        };
        let t = gen_stream(&p).unwrap();
        for (i, r) in t.iter().enumerate() {
            assert_eq!(r.addr, (i as u64 % 128) * 64);
        }
    }

    #[test]
    fn zipf_is_skewed() {
        let p = GenParams {
            kind: TraceKind::Zipf,
            records: 20_000,
            footprint: 1 << 22,
            zipf_s: 1.1,
            ..Default::default()
        };
        let t = gen_zipf(&p).unwrap();
        let prof = super::super::profile_pages(&t, 4096);
        let mut counts: Vec<u64> = prof.counts.values().copied().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let top: u64 = counts.iter().take(counts.len() / 4).sum();
        assert!(top as f64 > 0.5 * t.len() as f64);
    }
}
