//! Random excursions and random excursions variant tests.
//!
//! Both tests decompose the ±1 random walk into zero-to-zero cycles and are
//! applicable only when the cycle count J reaches 500.

use crate::bitio::BlockView;
use crate::nist::special::{erfc, igamc};

/// States examined by the random excursions test, in reporting order.
pub const EXCURSION_STATES: [i64; 8] = [-4, -3, -2, -1, 1, 2, 3, 4];
/// States examined by the variant test, in reporting order.
pub const VARIANT_STATES: [i64; 18] = [
    -9, -8, -7, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7, 8, 9,
];

/// Walk summary shared by both tests.
struct WalkStats {
    cycles: usize,
    /// nu[state][k]: cycles visiting `state` exactly k times (k = 5 means >= 5)
    nu: [[u64; 6]; 8],
    /// total visits per variant state across the whole walk
    xi: [u64; 18],
}

fn walk(block: &BlockView<'_>) -> WalkStats {
    let mut nu = [[0u64; 6]; 8];
    let mut xi = [0u64; 18];
    let mut in_cycle = [0u64; 8];
    let mut cycles = 0usize;
    let mut s = 0i64;

    let mut close_cycle = |in_cycle: &mut [u64; 8], cycles: &mut usize| {
        for (idx, count) in in_cycle.iter_mut().enumerate() {
            nu[idx][(*count).min(5) as usize] += 1;
            *count = 0;
        }
        *cycles += 1;
    };

    for bit in block.iter() {
        s += if bit { 1 } else { -1 };
        if s == 0 {
            close_cycle(&mut in_cycle, &mut cycles);
        } else {
            if (-4..=4).contains(&s) {
                let idx = if s < 0 { (s + 4) as usize } else { (s + 3) as usize };
                in_cycle[idx] += 1;
            }
            if (-9..=9).contains(&s) {
                let idx = if s < 0 { (s + 9) as usize } else { (s + 8) as usize };
                xi[idx] += 1;
            }
        }
    }
    if s != 0 {
        // the appended zero closes the final cycle
        close_cycle(&mut in_cycle, &mut cycles);
    }
    WalkStats { cycles, nu, xi }
}

/// Theoretical cycle-visit probabilities pi_k(x), k = 0..=5.
fn state_probabilities(x: i64) -> [f64; 6] {
    let ax = x.unsigned_abs() as f64;
    let p_leave = 1.0 - 1.0 / (2.0 * ax);
    let mut pi = [0.0; 6];
    pi[0] = p_leave;
    for (k, slot) in pi.iter_mut().enumerate().skip(1).take(4) {
        *slot = 1.0 / (4.0 * ax * ax) * p_leave.powi(k as i32 - 1);
    }
    pi[5] = 1.0 / (2.0 * ax) * p_leave.powi(4);
    pi
}

/// Random excursions test. `None` when J < `min_cycles` (not applicable).
pub fn random_excursions(block: &BlockView<'_>, min_cycles: usize) -> Option<Vec<f64>> {
    let stats = walk(block);
    if stats.cycles < min_cycles {
        return None;
    }
    let j = stats.cycles as f64;
    Some(
        EXCURSION_STATES
            .iter()
            .enumerate()
            .map(|(idx, &x)| {
                let pi = state_probabilities(x);
                let chi2: f64 = (0..6)
                    .map(|k| {
                        let d = stats.nu[idx][k] as f64 - j * pi[k];
                        d * d / (j * pi[k])
                    })
                    .sum();
                igamc(2.5, chi2 / 2.0)
            })
            .collect(),
    )
}

/// Random excursions variant test. `None` when J < `min_cycles`.
pub fn random_excursions_variant(block: &BlockView<'_>, min_cycles: usize) -> Option<Vec<f64>> {
    let stats = walk(block);
    if stats.cycles < min_cycles {
        return None;
    }
    let j = stats.cycles as f64;
    Some(
        VARIANT_STATES
            .iter()
            .enumerate()
            .map(|(idx, &x)| {
                let xi = stats.xi[idx] as f64;
                erfc((xi - j).abs() / (2.0 * j * (4.0 * x.abs() as f64 - 2.0)).sqrt())
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitio::BitSequence;

    #[test]
    fn mini_walk_cycle_count() {
        let s = BitSequence::from_ascii("0110110101").unwrap();
        let p = s.partition(10);
        let stats = walk(&p.blocks[0]);
        assert_eq!(stats.cycles, 3);
        // state +1 visited once in two cycles, twice in the third
        assert_eq!(stats.nu[4][1], 1);
        assert_eq!(stats.xi[9], 4);
    }

    #[test]
    fn applicability_gate() {
        let s = BitSequence::from_ascii("0110110101").unwrap();
        let p = s.partition(10);
        assert!(random_excursions(&p.blocks[0], 500).is_none());
        assert!(random_excursions(&p.blocks[0], 1).is_some());
        assert!(random_excursions_variant(&p.blocks[0], 500).is_none());
    }

    #[test]
    fn probabilities_sum_to_one() {
        for x in EXCURSION_STATES {
            let pi = state_probabilities(x);
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12, "state {x}");
        }
    }
}
