//! Linear complexity test with a bit-packed Berlekamp-Massey core.

use crate::bitio::BlockView;
use crate::nist::special::igamc;
use crate::nist::NistError;

const PI: [f64; 7] = [0.010417, 0.03125, 0.12500, 0.50000, 0.25000, 0.06250, 0.020833];

/// Linear complexity (shortest LFSR length) of `len` bits packed LSB-first
/// into `bits` (bit i of the sequence at word i/64, bit i%64).
pub fn berlekamp_massey(bits: &[u64], len: usize) -> usize {
    let words = len.div_ceil(64);
    debug_assert!(bits.len() >= words);
    let mut c = vec![0u64; words];
    let mut b = vec![0u64; words];
    let mut shifted = vec![0u64; words];
    // `window` holds the processed bits reversed: bit j = s_{n-j}
    let mut window = vec![0u64; words];
    c[0] = 1;
    b[0] = 1;
    let mut l = 0usize;
    let mut m = -1i64;

    for n in 0..len {
        // only words holding bits 0..=n carry information
        let live = (n >> 6) + 1;
        // window <<= 1; window |= s_n
        let mut carry = (bits[n >> 6] >> (n & 63)) & 1;
        for w in window.iter_mut().take(live) {
            let next_carry = *w >> 63;
            *w = (*w << 1) | carry;
            carry = next_carry;
        }
        // discrepancy = parity(c & window)
        let mut acc = 0u64;
        for (cw, ww) in c.iter().zip(&window).take(live) {
            acc ^= cw & ww;
        }
        if acc.count_ones() & 1 == 0 {
            continue;
        }
        // c ^= b << (n - m)
        let shift = (n as i64 - m) as usize;
        let (word_shift, bit_shift) = (shift >> 6, shift & 63);
        for i in (0..words).rev() {
            let mut v = 0u64;
            if i >= word_shift {
                v = b[i - word_shift] << bit_shift;
                if bit_shift > 0 && i > word_shift {
                    v |= b[i - word_shift - 1] >> (64 - bit_shift);
                }
            }
            shifted[i] = v;
        }
        if l * 2 <= n {
            let t = c.clone();
            for (cw, sw) in c.iter_mut().zip(&shifted) {
                *cw ^= sw;
            }
            l = n + 1 - l;
            m = n as i64;
            b = t;
        } else {
            for (cw, sw) in c.iter_mut().zip(&shifted) {
                *cw ^= sw;
            }
        }
    }
    l
}

/// Packs a bit range of a block into the LSB-first word layout
/// [`berlekamp_massey`] expects.
fn pack_range(block: &BlockView<'_>, start: usize, len: usize, out: &mut Vec<u64>) {
    out.clear();
    out.resize(len.div_ceil(64), 0);
    for i in 0..len {
        if block.bit(start + i) {
            out[i >> 6] |= 1u64 << (i & 63);
        }
    }
}

/// Linear complexity test over sub-blocks of `m` bits.
pub fn linear_complexity(block: &BlockView<'_>, m: usize) -> Result<f64, NistError> {
    let n_sub = block.len() / m;
    if n_sub == 0 || m < 4 {
        return Err(NistError::BlockTooShort { test: "LinearComplexity", len: block.len() });
    }
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mu = m as f64 / 2.0 + (9.0 + sign) / 36.0 - (m as f64 / 3.0 + 2.0 / 9.0) / 2f64.powi(m as i32);
    let mut nu = [0u64; 7];
    let mut packed = Vec::new();
    for j in 0..n_sub {
        pack_range(block, j * m, m, &mut packed);
        let l = berlekamp_massey(&packed, m);
        let t = sign * (l as f64 - mu) + 2.0 / 9.0;
        let bin = if t <= -2.5 {
            0
        } else if t <= -1.5 {
            1
        } else if t <= -0.5 {
            2
        } else if t <= 0.5 {
            3
        } else if t <= 1.5 {
            4
        } else if t <= 2.5 {
            5
        } else {
            6
        };
        nu[bin] += 1;
    }
    let nf = n_sub as f64;
    let chi2: f64 = nu
        .iter()
        .zip(&PI)
        .map(|(&obs, &p)| {
            let d = obs as f64 - nf * p;
            d * d / (nf * p)
        })
        .sum();
    Ok(igamc(3.0, chi2 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitio::BitSequence;

    fn complexity_of(ascii: &str) -> usize {
        let seq = BitSequence::from_ascii(ascii).unwrap();
        let mut packed = Vec::new();
        let p = seq.partition(seq.len());
        pack_range(&p.blocks[0], 0, seq.len(), &mut packed);
        berlekamp_massey(&packed, seq.len())
    }

    /// Plain unpacked Berlekamp-Massey, used as an independent oracle.
    fn bm_reference(bits: &[u8]) -> usize {
        let n = bits.len();
        let mut c = vec![0u8; n + 1];
        let mut b = vec![0u8; n + 1];
        c[0] = 1;
        b[0] = 1;
        let (mut l, mut m) = (0usize, -1i64);
        for nn in 0..n {
            let mut d = bits[nn];
            for i in 1..=l {
                d ^= c[i] & bits[nn - i];
            }
            if d == 1 {
                let t = c.clone();
                let shift = (nn as i64 - m) as usize;
                for i in shift..=n {
                    c[i] ^= b[i - shift];
                }
                if l * 2 <= nn {
                    l = nn + 1 - l;
                    m = nn as i64;
                    b = t;
                }
            }
        }
        l
    }

    #[test]
    fn known_complexities() {
        assert_eq!(complexity_of("1101011110001"), 4);
        // PRBS-9 and PRBS-11 prefixes
        assert_eq!(complexity_of("0000100011000010011"), 9);
        assert_eq!(complexity_of("00000000101000000100010"), 11);
        assert_eq!(complexity_of("000"), 0);
        assert_eq!(complexity_of("001"), 3);
    }

    #[test]
    fn packed_matches_reference_oracle() {
        let mut state = 99u64;
        for trial in 0..200 {
            let len = 1 + (trial * 7) % 300;
            let bits: Vec<u8> = (0..len)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (state >> 63) as u8
                })
                .collect();
            let seq = BitSequence::from_bits(bits.iter().copied());
            let p = seq.partition(len);
            let mut packed = Vec::new();
            pack_range(&p.blocks[0], 0, len, &mut packed);
            assert_eq!(
                berlekamp_massey(&packed, len),
                bm_reference(&bits),
                "trial {trial} len {len}"
            );
        }
    }

    #[test]
    fn lfsr_output_fails_suite_statistic() {
        // x^5 + x^2 + 1 LFSR: complexity stays 5, far below mu for M = 500
        let mut reg = [1u8, 0, 0, 1, 0];
        let seq = BitSequence::from_bits((0..10_000).map(|_| {
            let out = reg[4];
            let fb = reg[4] ^ reg[1];
            reg.rotate_right(1);
            reg[0] = fb;
            out
        }));
        let p = seq.partition(10_000);
        assert!(linear_complexity(&p.blocks[0], 500).unwrap() < 1e-12);
    }
}
