//! Carrier generation: a simulated chaotic source (or file-ingested samples,
//! or a seeded pseudorandom source) pushed through the quantize → derivative →
//! LSB-extraction pipeline.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitio::BitSequence;

/// Logistic-map gain used by the default chaotic source.
pub const LOGISTIC_R: f64 = 3.99999;
/// Iterations discarded before the chaotic source starts emitting.
pub const CHAOTIC_BURN_IN: usize = 1000;

#[derive(Error, Debug)]
pub enum RbgError {
    #[error("empty sample series")]
    EmptySeries,
    #[error("series too short: {len} samples cannot support derivative order {order}")]
    SeriesTooShort { len: usize, order: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("sample file error: {0}")]
    Io(#[from] std::io::Error),
}

/// Where the raw intensity samples come from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Source {
    /// Logistic-map iterates, seeded; a stand-in for a chaotic intensity trace.
    ChaoticMap { seed: u64, r: f64 },
    /// Raw samples from a file, one u8 or u16-LE value per sample.
    SampleFile { path: PathBuf, width: SampleWidth },
    /// Seeded uniform samples already aligned to the ADC grid.
    Pseudorandom { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleWidth {
    U8,
    U16Le,
}

/// Pipeline configuration: source, ADC depth `p`, derivative order `n`,
/// retained LSB count, and target output length.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RbgConfig {
    pub source: Source,
    pub adc_bits: u32,
    pub derivative_order: usize,
    pub lsb_count: u32,
    pub output_bits: usize,
}

impl RbgConfig {
    /// The reference pipeline: 8-bit ADC, 3rd derivative, 5 LSBs.
    pub fn with_defaults(source: Source, output_bits: usize) -> Self {
        RbgConfig { source, adc_bits: 8, derivative_order: 3, lsb_count: 5, output_bits }
    }

    fn validate(&self) -> Result<(), RbgError> {
        if self.lsb_count < 1 || self.lsb_count > self.adc_bits {
            return Err(RbgError::InvalidConfig(format!(
                "lsb_count {} must be in 1..={}",
                self.lsb_count, self.adc_bits
            )));
        }
        if self.adc_bits < 1 || self.adc_bits > 32 {
            return Err(RbgError::InvalidConfig("adc_bits must be in 1..=32".into()));
        }
        if self.output_bits < 1 {
            return Err(RbgError::InvalidConfig("output_bits must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ordered real-valued samples (dimensionless intensity).
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSeries(pub Vec<f64>);

/// One logistic-map step `x <- r * x * (1 - x)`.
#[inline]
pub fn logistic_step(x: f64, r: f64) -> f64 {
    r * x * (1.0 - x)
}

/// Maps a seed to an interior starting point of the unit interval.
pub fn logistic_x0(seed: u64) -> f64 {
    // scale into (0,1), nudged away from the fixed points 0 and 1-1/r
    let u = (seed as f64 + 0.5) / (u64::MAX as f64 + 1.0);
    0.05 + 0.9 * u
}

/// Emits `count` logistic-map samples after the burn-in, deterministically
/// from the seed.
pub fn chaotic_signal(seed: u64, count: usize) -> SampleSeries {
    chaotic_signal_r(seed, count, LOGISTIC_R)
}

pub fn chaotic_signal_r(seed: u64, count: usize, r: f64) -> SampleSeries {
    let mut x = logistic_x0(seed);
    for _ in 0..CHAOTIC_BURN_IN {
        x = logistic_step(x, r);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        x = logistic_step(x, r);
        out.push(x);
    }
    SampleSeries(out)
}

/// Pseudorandom samples on the centers of the `2^p` ADC bins, so the ADC
/// reproduces a uniform integer stream exactly.
pub fn pseudorandom_signal(seed: u64, count: usize, adc_bits: u32) -> SampleSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = 1u64 << adc_bits;
    let scale = 1.0 / levels as f64;
    let out = (0..count)
        .map(|_| (rng.gen_range(0..levels) as f64 + 0.5) * scale)
        .collect();
    SampleSeries(out)
}

/// Min-max ADC: maps the observed range onto `[0, 2^p - 1]` with rounding.
/// A constant series maps to all zeros.
pub fn quantize(series: &SampleSeries, adc_bits: u32) -> Result<Vec<i64>, RbgError> {
    if series.0.is_empty() {
        return Err(RbgError::EmptySeries);
    }
    let lo = series.0.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = series.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_code = ((1u64 << adc_bits) - 1) as f64;
    if hi <= lo {
        return Ok(vec![0; series.0.len()]);
    }
    let scale = max_code / (hi - lo);
    Ok(series
        .0
        .iter()
        .map(|&v| ((v - lo) * scale + 0.5).floor() as i64)
        .collect())
}

/// n-fold forward difference; order 0 is the identity.
pub fn derivative(series: &[i64], order: usize) -> Result<Vec<i64>, RbgError> {
    if series.len() <= order {
        return Err(RbgError::SeriesTooShort { len: series.len(), order });
    }
    let mut cur = series.to_vec();
    let mut len = cur.len();
    for _ in 0..order {
        for i in 0..len - 1 {
            cur[i] = cur[i + 1] - cur[i];
        }
        len -= 1;
    }
    cur.truncate(len);
    Ok(cur)
}

/// Appends the `m` least significant bits of each sample's two's-complement
/// representation, most significant of the kept bits first.
pub fn extract_lsbs(series: &[i64], lsb_count: u32) -> BitSequence {
    let mut seq = BitSequence::zeros(series.len() * lsb_count as usize);
    let mut pos = 0;
    for &v in series {
        let u = v as u64;
        for k in (0..lsb_count).rev() {
            if (u >> k) & 1 == 1 {
                seq.set(pos, true);
            }
            pos += 1;
        }
    }
    seq
}

/// Runs the full pipeline and truncates to `output_bits`.
pub fn generate(config: &RbgConfig) -> Result<BitSequence, RbgError> {
    config.validate()?;
    let lsb = config.lsb_count as usize;
    let sample_count = config.output_bits.div_ceil(lsb) + config.derivative_order;
    let series = match &config.source {
        Source::ChaoticMap { seed, r } => chaotic_signal_r(*seed, sample_count, *r),
        Source::Pseudorandom { seed } => {
            pseudorandom_signal(*seed, sample_count, config.adc_bits)
        }
        Source::SampleFile { path, width } => read_sample_file(path, *width)?,
    };
    let quantized = quantize(&series, config.adc_bits)?;
    let derived = derivative(&quantized, config.derivative_order)?;
    let mut bits = extract_lsbs(&derived, config.lsb_count);
    // a sample file shorter than requested yields fewer bits; otherwise trim
    bits.truncate(config.output_bits);
    Ok(bits)
}

fn read_sample_file(path: &std::path::Path, width: SampleWidth) -> Result<SampleSeries, RbgError> {
    let data = std::fs::read(path)?;
    let values = match width {
        SampleWidth::U8 => data.iter().map(|&b| b as f64).collect(),
        SampleWidth::U16Le => data
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64)
            .collect(),
    };
    Ok(SampleSeries(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chaotic_deterministic() {
        let a = chaotic_signal(7, 10);
        let b = chaotic_signal(7, 10);
        assert_eq!(a, b);
    }

    #[test]
    fn logistic_single_step() {
        assert!((logistic_step(0.5, LOGISTIC_R) - 0.9999975).abs() < 1e-12);
    }

    #[test]
    fn chaotic_burn_in_position() {
        // first emitted sample is iterate #1001 from x0
        let seed = 99;
        let mut x = logistic_x0(seed);
        for _ in 0..(CHAOTIC_BURN_IN + 1) {
            x = logistic_step(x, LOGISTIC_R);
        }
        assert_eq!(chaotic_signal(seed, 1).0[0], x);
    }

    #[test]
    fn quantize_endpoints() {
        let q = quantize(&SampleSeries(vec![0.0, 1.0]), 8).unwrap();
        assert_eq!(q, vec![0, 255]);
    }

    #[test]
    fn quantize_rounds_half_up() {
        let q = quantize(&SampleSeries(vec![0.0, 0.5, 1.0]), 1).unwrap();
        assert_eq!(q, vec![0, 1, 1]);
    }

    #[test]
    fn quantize_constant_series() {
        let q = quantize(&SampleSeries(vec![0.42; 5]), 12).unwrap();
        assert_eq!(q, vec![0; 5]);
    }

    #[test]
    fn quantize_empty() {
        assert!(matches!(
            quantize(&SampleSeries(vec![]), 8),
            Err(RbgError::EmptySeries)
        ));
    }

    #[test]
    fn derivative_first_order() {
        assert_eq!(derivative(&[1, 4, 9, 16], 1).unwrap(), vec![3, 5, 7]);
    }

    #[test]
    fn derivative_identity() {
        assert_eq!(derivative(&[5, -2, 7], 0).unwrap(), vec![5, -2, 7]);
    }

    #[test]
    fn derivative_third_order() {
        assert_eq!(derivative(&[0, 1, 0, 1, 0], 3).unwrap(), vec![4, -4]);
    }

    #[test]
    fn derivative_too_short() {
        assert!(matches!(
            derivative(&[1, 2], 2),
            Err(RbgError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn derivative_linearity() {
        let mut rng_state = 123u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 40) as i64 - (1 << 23)
        };
        let a: Vec<i64> = (0..50).map(|_| next()).collect();
        let b: Vec<i64> = (0..50).map(|_| next()).collect();
        let sum: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        for order in 0..4 {
            let da = derivative(&a, order).unwrap();
            let db = derivative(&b, order).unwrap();
            let dsum = derivative(&sum, order).unwrap();
            let joined: Vec<i64> = da.iter().zip(&db).map(|(x, y)| x + y).collect();
            assert_eq!(dsum, joined, "order {order}");
        }
    }

    #[test]
    fn lsbs_positive_and_negative() {
        assert_eq!(extract_lsbs(&[6], 2).to_ascii(), "10");
        assert_eq!(extract_lsbs(&[-1], 3).to_ascii(), "111");
        assert_eq!(extract_lsbs(&[0, 0], 1).to_ascii(), "00");
    }

    #[test]
    fn length_bookkeeping() {
        // |extract_lsbs(derivative(q, n), m)| = m * (|q| - n)
        let series = SampleSeries((0..100).map(|i| (i as f64).sin()).collect());
        let q = quantize(&series, 8).unwrap();
        for order in 0..4 {
            let d = derivative(&q, order).unwrap();
            for m in 1..=8 {
                assert_eq!(extract_lsbs(&d, m).len(), m as usize * (q.len() - order));
            }
        }
    }

    #[test]
    fn generate_deterministic_and_sized() {
        let cfg = RbgConfig::with_defaults(Source::Pseudorandom { seed: 11 }, 4096);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4096);
    }

    #[test]
    fn generate_chaotic_runs() {
        let cfg = RbgConfig::with_defaults(Source::ChaoticMap { seed: 3, r: LOGISTIC_R }, 1000);
        let bits = generate(&cfg).unwrap();
        assert_eq!(bits.len(), 1000);
    }

    #[test]
    fn sample_file_length_accounting() {
        let dir = std::env::temp_dir().join("randembed-rbg-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("samples.u8");
        std::fs::write(&path, (0..=255u8).cycle().take(1000).collect::<Vec<_>>()).unwrap();
        let cfg = RbgConfig {
            source: Source::SampleFile { path: path.clone(), width: SampleWidth::U8 },
            adc_bits: 8,
            derivative_order: 3,
            lsb_count: 5,
            output_bits: 10_000,
        };
        // 1000 samples, n = 3, m = 5 -> at most 5 * 997 bits available
        let bits = generate(&cfg).unwrap();
        assert_eq!(bits.len(), 5 * 997);
        std::fs::remove_file(path).ok();
    }
}
