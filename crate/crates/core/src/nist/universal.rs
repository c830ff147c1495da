//! Maurer's universal statistical test.

use crate::bitio::BlockView;
use crate::nist::special::erfc;
use crate::nist::NistError;

// expected value and variance of the per-block statistic, indexed by L = 2..=16
const EXPECTED: [f64; 15] = [
    1.5374383, 2.4016068, 3.3112247, 4.2534266, 5.2177052, 6.1962507, 7.1836656,
    8.1764248, 9.1723243, 10.170032, 11.168765, 12.168070, 13.167693, 14.167488,
    15.167379,
];
const VARIANCE: [f64; 15] = [
    1.338, 1.901, 2.358, 2.705, 2.954, 3.125, 3.238, 3.311, 3.356, 3.384, 3.401,
    3.410, 3.416, 3.419, 3.421,
];

/// Universal test with block size `l` and `q` initialization blocks.
pub fn universal(block: &BlockView<'_>, l: usize, q: usize) -> Result<f64, NistError> {
    if !(2..=16).contains(&l) {
        return Err(NistError::UnsupportedParameter(format!(
            "Universal block size L = {l} outside 2..=16"
        )));
    }
    let n_blocks = block.len() / l;
    if n_blocks <= q {
        return Err(NistError::BlockTooShort { test: "Universal", len: block.len() });
    }
    let k = n_blocks - q;

    let mut last_seen = vec![0u32; 1 << l];
    let read_block = |i: usize| -> usize {
        let base = (i - 1) * l;
        let mut v = 0usize;
        for j in 0..l {
            v = (v << 1) | block.bit(base + j) as usize;
        }
        v
    };
    for i in 1..=q {
        last_seen[read_block(i)] = i as u32;
    }
    let mut sum = 0.0f64;
    for i in q + 1..=n_blocks {
        let pat = read_block(i);
        let prev = last_seen[pat] as usize;
        let distance = if prev == 0 { i } else { i - prev };
        sum += (distance as f64).log2();
        last_seen[pat] = i as u32;
    }
    let fn_stat = sum / k as f64;

    let expected = EXPECTED[l - 2];
    let variance = VARIANCE[l - 2];
    let c = 0.7 - 0.8 / l as f64 + (4.0 + 32.0 / l as f64) * (k as f64).powf(-3.0 / l as f64) / 15.0;
    let sigma = c * (variance / k as f64).sqrt();
    Ok(erfc((fn_stat - expected).abs() / (std::f64::consts::SQRT_2 * sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitio::BitSequence;

    #[test]
    fn repeating_pattern_fails() {
        let s = BitSequence::from_bits((0..400_000).map(|i| ((i / 7) % 2) as u8));
        let p = s.partition(400_000);
        assert!(universal(&p.blocks[0], 6, 640).unwrap() < 1e-6);
    }

    #[test]
    fn too_short_is_an_error() {
        let s = BitSequence::zeros(100);
        let p = s.partition(100);
        assert!(universal(&p.blocks[0], 7, 1280).is_err());
    }
}
