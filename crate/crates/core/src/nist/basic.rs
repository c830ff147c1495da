//! Frequency, block-frequency, runs, longest-run, and cumulative-sums tests.

use crate::bitio::BlockView;
use crate::nist::special::{erfc, igamc, normal_cdf};
use crate::nist::NistError;

/// Monobit frequency test.
pub fn frequency(block: &BlockView<'_>) -> f64 {
    let n = block.len();
    let ones = block.count_ones() as i64;
    let s = 2 * ones - n as i64;
    let s_obs = (s as f64).abs() / (n as f64).sqrt();
    erfc(s_obs / std::f64::consts::SQRT_2)
}

/// Frequency within m-bit sub-blocks.
pub fn block_frequency(block: &BlockView<'_>, m: usize) -> Result<f64, NistError> {
    let n = block.len();
    let sub_blocks = n / m;
    if sub_blocks == 0 {
        return Err(NistError::BlockTooShort { test: "BlockFrequency", len: n });
    }
    let mut chi2 = 0.0;
    for j in 0..sub_blocks {
        let ones: usize = (0..m).filter(|&i| block.bit(j * m + i)).count();
        let pi = ones as f64 / m as f64;
        chi2 += (pi - 0.5) * (pi - 0.5);
    }
    chi2 *= 4.0 * m as f64;
    Ok(igamc(sub_blocks as f64 / 2.0, chi2 / 2.0))
}

/// Runs test (total number of runs of identical bits).
pub fn runs(block: &BlockView<'_>) -> f64 {
    let n = block.len();
    let pi = block.count_ones() as f64 / n as f64;
    if (pi - 0.5).abs() >= 2.0 / (n as f64).sqrt() {
        return 0.0;
    }
    let mut v = 1u64;
    let mut prev = block.bit(0);
    for bit in block.iter().skip(1) {
        if bit != prev {
            v += 1;
        }
        prev = bit;
    }
    let num = (v as f64 - 2.0 * n as f64 * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * n as f64).sqrt() * pi * (1.0 - pi);
    erfc(num / den)
}

struct LongestRunTable {
    k: usize,
    lowest: u32,
    pi: &'static [f64],
}

fn longest_run_table(m: usize) -> Result<LongestRunTable, NistError> {
    // class tables for the reference sub-block sizes
    match m {
        8 => Ok(LongestRunTable {
            k: 3,
            lowest: 1,
            pi: &[0.21484375, 0.3671875, 0.23046875, 0.1875],
        }),
        128 => Ok(LongestRunTable {
            k: 5,
            lowest: 4,
            pi: &[
                0.1174035788,
                0.242955959,
                0.249363483,
                0.17517706,
                0.102701071,
                0.112398847,
            ],
        }),
        10_000 => Ok(LongestRunTable {
            k: 6,
            lowest: 10,
            pi: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
        }),
        other => Err(NistError::UnsupportedParameter(format!(
            "LongestRun has no class table for M = {other} (use 8, 128, or 10000)"
        ))),
    }
}

/// Longest run of ones within M-bit sub-blocks.
pub fn longest_run(block: &BlockView<'_>, m: usize) -> Result<f64, NistError> {
    let table = longest_run_table(m)?;
    let n = block.len();
    let sub_blocks = n / m;
    if sub_blocks == 0 {
        return Err(NistError::BlockTooShort { test: "LongestRun", len: n });
    }
    let mut nu = vec![0u64; table.k + 1];
    for j in 0..sub_blocks {
        let mut longest = 0u32;
        let mut run = 0u32;
        for i in 0..m {
            if block.bit(j * m + i) {
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
            }
        }
        let class = longest.clamp(table.lowest, table.lowest + table.k as u32) - table.lowest;
        nu[class as usize] += 1;
    }
    let nf = sub_blocks as f64;
    let chi2: f64 = nu
        .iter()
        .zip(table.pi)
        .map(|(&obs, &p)| {
            let d = obs as f64 - nf * p;
            d * d / (nf * p)
        })
        .sum();
    Ok(igamc(table.k as f64 / 2.0, chi2 / 2.0))
}

/// Cumulative-sums test; returns the forward and backward p-values.
///
/// Backward partial sums are `S_n - S_{n-j}`, so one forward pass tracking
/// the prefix-sum extrema yields both statistics.
pub fn cumulative_sums(block: &BlockView<'_>) -> [f64; 2] {
    let n = block.len();
    let mut s = 0i64;
    let mut z_fwd = 0i64;
    let mut prefix_min = 0i64; // over S_0 .. S_{n-1}
    let mut prefix_max = 0i64;
    for bit in block.iter() {
        prefix_min = prefix_min.min(s);
        prefix_max = prefix_max.max(s);
        s += if bit { 1 } else { -1 };
        z_fwd = z_fwd.max(s.abs());
    }
    let z_bwd = (s - prefix_min).abs().max((s - prefix_max).abs());
    [cusum_pvalue(n, z_fwd as f64), cusum_pvalue(n, z_bwd as f64)]
}

fn cusum_pvalue(n: usize, z: f64) -> f64 {
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    // index ranges truncate toward zero, matching the reference suite
    let k1_lo = ((-nf / z + 1.0) / 4.0).trunc() as i64;
    let k1_hi = ((nf / z - 1.0) / 4.0).trunc() as i64;
    let k2_lo = ((-nf / z - 3.0) / 4.0).trunc() as i64;
    let mut sum1 = 0.0;
    for k in k1_lo..=k1_hi {
        let kf = k as f64;
        sum1 += normal_cdf((4.0 * kf + 1.0) * z / sqrt_n) - normal_cdf((4.0 * kf - 1.0) * z / sqrt_n);
    }
    let mut sum2 = 0.0;
    for k in k2_lo..=k1_hi {
        let kf = k as f64;
        sum2 += normal_cdf((4.0 * kf + 3.0) * z / sqrt_n) - normal_cdf((4.0 * kf + 1.0) * z / sqrt_n);
    }
    (1.0 - sum1 + sum2).clamp(0.0, 1.0)
}
