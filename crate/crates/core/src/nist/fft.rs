//! Discrete Fourier transform (spectral) test.

use std::sync::{Arc, LazyLock, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::bitio::BlockView;
use crate::nist::special::erfc;

// one shared planner so repeated block lengths reuse their twiddle tables
static PLANNER: LazyLock<Mutex<FftPlanner<f64>>> = LazyLock::new(|| Mutex::new(FftPlanner::new()));

fn plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.lock().unwrap().plan_fft_forward(n)
}

/// Spectral test: the fraction of DFT peaks below the 95% threshold should
/// match the expectation for a random sequence.
pub fn fft_test(block: &BlockView<'_>) -> f64 {
    let n = block.len();
    let threshold = ((1.0f64 / 0.05).ln() * n as f64).sqrt();
    let below = if n % 2 == 0 && n >= 8 {
        count_below_real_packed(block, threshold)
    } else {
        count_below_direct(block, threshold)
    };
    let expected = 0.95 * n as f64 / 2.0;
    let d = (below as f64 - expected) / (n as f64 * 0.95 * 0.05 / 4.0).sqrt();
    erfc(d.abs() / std::f64::consts::SQRT_2)
}

fn count_below_direct(block: &BlockView<'_>, threshold: f64) -> usize {
    let n = block.len();
    let mut buf: Vec<Complex<f64>> = block
        .iter()
        .map(|b| Complex::new(if b { 1.0 } else { -1.0 }, 0.0))
        .collect();
    plan(n).process(&mut buf);
    buf[..n / 2].iter().filter(|c| c.norm() < threshold).count()
}

/// Real-input transform via the half-size complex-packing identity:
/// interleave the ±1 samples into n/2 complex points, transform once, and
/// untangle X_k = E_k + w^k O_k for k < n/2.
fn count_below_real_packed(block: &BlockView<'_>, threshold: f64) -> usize {
    let n = block.len();
    let h = n / 2;
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(h);
    let mut iter = block.iter();
    for _ in 0..h {
        let re = if iter.next().unwrap() { 1.0 } else { -1.0 };
        let im = if iter.next().unwrap() { 1.0 } else { -1.0 };
        buf.push(Complex::new(re, im));
    }
    plan(h).process(&mut buf);

    let thr_sq = threshold * threshold;
    let mut below = 0usize;
    // twiddle w^k = exp(-2 pi i k / n), advanced by recurrence and resynced
    // periodically to keep rounding in check
    let step = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI / n as f64);
    let mut w = Complex::new(1.0, 0.0);
    for k in 0..h {
        if k % 256 == 0 {
            w = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / n as f64);
        }
        let zk = buf[k];
        let zmk = buf[(h - k) % h].conj();
        let even = (zk + zmk) * 0.5;
        let odd = (zk - zmk) * Complex::new(0.0, -0.5);
        let x = even + w * odd;
        if x.norm_sqr() < thr_sq {
            below += 1;
        }
        w = w * step;
    }
    below
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitio::BitSequence;

    fn naive_count_below(x: &[f64], threshold: f64) -> usize {
        let n = x.len();
        let mut below = 0usize;
        for k in 0..n / 2 {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (j, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            if (re * re + im * im).sqrt() < threshold {
                below += 1;
            }
        }
        below
    }

    #[test]
    fn periodic_input_fails() {
        // strong periodicity concentrates spectral mass above the threshold
        let s = BitSequence::from_bits((0..4096).map(|i| ((i / 4) % 2) as u8));
        let p = s.partition(4096);
        assert!(fft_test(&p.blocks[0]) < 1e-6);
    }

    #[test]
    fn packed_and_direct_agree_with_naive_dft() {
        let mut state = 0xabcdu64;
        for len in [10usize, 64, 100, 101, 257, 1000] {
            let mut x = Vec::with_capacity(len);
            let seq = BitSequence::from_bits((0..len).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let b = (state >> 63) as u8;
                x.push(if b == 1 { 1.0 } else { -1.0 });
                b
            }));
            let p = seq.partition(len);
            let threshold = ((1.0f64 / 0.05).ln() * len as f64).sqrt();
            let naive = naive_count_below(&x, threshold);
            assert_eq!(count_below_direct(&p.blocks[0], threshold), naive, "direct len {len}");
            if len % 2 == 0 {
                assert_eq!(
                    count_below_real_packed(&p.blocks[0], threshold),
                    naive,
                    "packed len {len}"
                );
            }
        }
    }
}
