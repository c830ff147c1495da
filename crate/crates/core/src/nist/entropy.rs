//! Serial and approximate-entropy tests (overlapping m-bit pattern counts
//! with wraparound).

use crate::bitio::BlockView;
use crate::nist::special::igamc;
use crate::nist::NistError;

/// Counts of all overlapping `m`-bit patterns, the sequence extended
/// cyclically by its first `m - 1` bits.
fn pattern_counts(block: &BlockView<'_>, m: usize) -> Vec<u32> {
    let n = block.len();
    let mask = (1usize << m) - 1;
    let mut counts = vec![0u32; 1 << m];
    let mut window = 0usize;
    // warm up with the first m-1 bits
    for i in 0..m - 1 {
        window = (window << 1) | block.bit(i) as usize;
    }
    for i in m - 1..n {
        window = ((window << 1) | block.bit(i) as usize) & mask;
        counts[window] += 1;
    }
    for i in 0..m - 1 {
        window = ((window << 1) | block.bit(i) as usize) & mask;
        counts[window] += 1;
    }
    counts
}

/// Halves pattern length by summing sibling counts (valid for cyclic counts).
fn fold_counts(counts: &[u32]) -> Vec<u32> {
    counts.chunks_exact(2).map(|c| c[0] + c[1]).collect()
}

fn psi_sq(counts: &[u32], n: usize) -> f64 {
    let m_pow = counts.len() as f64;
    let sum: f64 = counts.iter().map(|&c| c as f64 * c as f64).sum();
    m_pow / n as f64 * sum - n as f64
}

/// Serial test; returns the two p-values (first and second difference of
/// the psi-square statistics).
pub fn serial(block: &BlockView<'_>, m: usize) -> Result<[f64; 2], NistError> {
    if m < 2 || m > 24 || block.len() < (1 << m) {
        return Err(NistError::UnsupportedParameter(format!(
            "Serial m = {m} infeasible for block of {} bits",
            block.len()
        )));
    }
    let n = block.len();
    let counts_m = pattern_counts(block, m);
    let counts_m1 = fold_counts(&counts_m);
    let counts_m2 = fold_counts(&counts_m1);
    let psi_m = psi_sq(&counts_m, n);
    let psi_m1 = psi_sq(&counts_m1, n);
    let psi_m2 = if m >= 2 { psi_sq(&counts_m2, n) } else { 0.0 };
    let del1 = psi_m - psi_m1;
    let del2 = psi_m - 2.0 * psi_m1 + psi_m2;
    Ok([
        igamc(2f64.powi(m as i32 - 2), del1 / 2.0),
        igamc(2f64.powi(m as i32 - 3), del2 / 2.0),
    ])
}

/// Approximate entropy test comparing m and m+1 bit pattern frequencies.
pub fn approximate_entropy(block: &BlockView<'_>, m: usize) -> Result<f64, NistError> {
    if m < 1 || m + 1 > 24 || block.len() < (1 << (m + 1)) {
        return Err(NistError::UnsupportedParameter(format!(
            "ApproximateEntropy m = {m} infeasible for block of {} bits",
            block.len()
        )));
    }
    let n = block.len() as f64;
    let counts_m1 = pattern_counts(block, m + 1);
    let counts_m = fold_counts(&counts_m1);
    let phi = |counts: &[u32]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let f = c as f64 / n;
                f * f.ln()
            })
            .sum()
    };
    let apen = phi(&counts_m) - phi(&counts_m1);
    let chi2 = 2.0 * n * (std::f64::consts::LN_2 - apen);
    Ok(igamc(2f64.powi(m as i32 - 1), chi2 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitio::BitSequence;

    #[test]
    fn counts_fold_consistently() {
        let mut state = 3u64;
        let seq = BitSequence::from_bits((0..500).map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 63) as u8
        }));
        let p = seq.partition(500);
        let c4 = pattern_counts(&p.blocks[0], 4);
        let c3 = pattern_counts(&p.blocks[0], 3);
        assert_eq!(fold_counts(&c4), c3);
        assert_eq!(c4.iter().sum::<u32>(), 500);
    }

    #[test]
    fn constant_input_fails_both() {
        let s = BitSequence::from_bits(std::iter::repeat(1u8).take(4096));
        let p = s.partition(4096);
        let [p1, _] = serial(&p.blocks[0], 5).unwrap();
        assert!(p1 < 1e-6);
        assert!(approximate_entropy(&p.blocks[0], 4).unwrap() < 1e-6);
    }
}
