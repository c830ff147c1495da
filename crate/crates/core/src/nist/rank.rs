//! Binary matrix rank test over GF(2).

use crate::bitio::BlockView;
use crate::nist::special::igamc;
use crate::nist::NistError;

/// Rank of a bit matrix given as packed rows (column j in bit j), computed
/// by Gaussian elimination over GF(2).
pub fn gf2_rank(rows: &mut [u64], cols: usize) -> usize {
    let mut rank = 0;
    for col in 0..cols {
        let mask = 1u64 << col;
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] & mask != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank];
        for row in rows.iter_mut().skip(rank + 1) {
            if *row & mask != 0 {
                *row ^= pivot_row;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Probabilities that a random `m x q` binary matrix has full rank, rank
/// `min(m,q) - 1`, and anything lower.
pub fn rank_probabilities(m: usize, q: usize) -> (f64, f64, f64) {
    let prob = |r: usize| -> f64 {
        let exp = (r * (m + q - r)) as f64 - (m * q) as f64;
        let mut product = 1.0;
        for i in 0..r {
            product *= (1.0 - 2f64.powi(i as i32 - m as i32))
                * (1.0 - 2f64.powi(i as i32 - q as i32))
                / (1.0 - 2f64.powi(i as i32 - r as i32));
        }
        2f64.powf(exp) * product
    };
    let full = prob(m.min(q));
    let minus_one = prob(m.min(q) - 1);
    (full, minus_one, 1.0 - full - minus_one)
}

/// Rank test: chi-square over {full, full-1, lower} rank classes of
/// consecutive `size x size` matrices.
pub fn rank_test(block: &BlockView<'_>, size: usize) -> Result<f64, NistError> {
    assert!((2..=64).contains(&size), "matrix size must be in 2..=64");
    let bits_per_matrix = size * size;
    let n_matrices = block.len() / bits_per_matrix;
    if n_matrices == 0 {
        return Err(NistError::BlockTooShort { test: "Rank", len: block.len() });
    }
    let (p_full, p_minus, p_rest) = rank_probabilities(size, size);
    let mut counts = [0u64; 3];
    let mut rows = vec![0u64; size];
    for mat in 0..n_matrices {
        let base = mat * bits_per_matrix;
        for (r, row) in rows.iter_mut().enumerate() {
            let mut word = 0u64;
            for c in 0..size {
                if block.bit(base + r * size + c) {
                    word |= 1u64 << c;
                }
            }
            *row = word;
        }
        let rank = gf2_rank(&mut rows, size);
        if rank == size {
            counts[0] += 1;
        } else if rank == size - 1 {
            counts[1] += 1;
        } else {
            counts[2] += 1;
        }
    }
    let nf = n_matrices as f64;
    let chi2 = (counts[0] as f64 - nf * p_full).powi(2) / (nf * p_full)
        + (counts[1] as f64 - nf * p_minus).powi(2) / (nf * p_minus)
        + (counts[2] as f64 - nf * p_rest).powi(2) / (nf * p_rest);
    Ok(igamc(1.0, chi2 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_and_duplicates() {
        let mut ident = vec![0b001u64, 0b010, 0b100];
        assert_eq!(gf2_rank(&mut ident, 3), 3);
        let mut dup = vec![0b101u64, 0b101, 0b010];
        assert_eq!(gf2_rank(&mut dup, 3), 2);
        let mut zero = vec![0u64; 4];
        assert_eq!(gf2_rank(&mut zero, 4), 0);
    }

    #[test]
    fn square_probabilities_sum_to_one() {
        for size in [3, 8, 32] {
            let (a, b, c) = rank_probabilities(size, size);
            assert!((a + b + c - 1.0).abs() < 1e-12);
            assert!(a > 0.0 && b > 0.0 && c > 0.0);
        }
    }

    #[test]
    fn probabilities_32x32() {
        // product formula limit values for the standard 32x32 configuration
        let (full, minus, rest) = rank_probabilities(32, 32);
        assert!((full - 0.2887880951538411).abs() < 1e-12);
        assert!((minus - 0.5775761901732046).abs() < 1e-12);
        assert!((rest - 0.1336357146729543).abs() < 1e-12);
    }
}
