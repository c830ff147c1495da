//! The 15-test SP 800-22 battery with the aggregation and verdict rules used
//! for certification: per-block p-values, per-statistic pass proportions
//! against a 3-sigma binomial threshold, and a chi-square uniformity check
//! on the p-value histogram.

pub mod basic;
pub mod complexity;
pub mod entropy;
pub mod excursions;
pub mod fft;
pub mod rank;
pub mod special;
pub mod template;
pub mod universal;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitio::BlockView;
use special::igamc;

/// Uniformity P-values must exceed this constant for a statistic to pass.
pub const UNIFORMITY_MIN: f64 = 0.0001;

#[derive(Error, Debug)]
pub enum NistError {
    #[error("block length mismatch: expected {expected}, got {got}")]
    BlockLengthMismatch { expected: usize, got: usize },
    #[error("{test}: block of {len} bits is too short")]
    BlockTooShort { test: &'static str, len: usize },
    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),
}

/// The fifteen tests, in the reference reporting order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestId {
    Frequency,
    BlockFrequency,
    CumulativeSums,
    Runs,
    LongestRun,
    Rank,
    Fft,
    NonOverlappingTemplate,
    OverlappingTemplate,
    Universal,
    ApproximateEntropy,
    RandomExcursions,
    RandomExcursionsVariant,
    Serial,
    LinearComplexity,
}

pub const ALL_TESTS: [TestId; 15] = [
    TestId::Frequency,
    TestId::BlockFrequency,
    TestId::CumulativeSums,
    TestId::Runs,
    TestId::LongestRun,
    TestId::Rank,
    TestId::Fft,
    TestId::NonOverlappingTemplate,
    TestId::OverlappingTemplate,
    TestId::Universal,
    TestId::ApproximateEntropy,
    TestId::RandomExcursions,
    TestId::RandomExcursionsVariant,
    TestId::Serial,
    TestId::LinearComplexity,
];

impl TestId {
    pub fn name(&self) -> &'static str {
        match self {
            TestId::Frequency => "Frequency",
            TestId::BlockFrequency => "Block Frequency",
            TestId::CumulativeSums => "Cumulative Sums",
            TestId::Runs => "Runs",
            TestId::LongestRun => "Longest Run",
            TestId::Rank => "Rank",
            TestId::Fft => "FFT",
            TestId::NonOverlappingTemplate => "Non-overlapping Template",
            TestId::OverlappingTemplate => "Overlapping Template",
            TestId::Universal => "Universal",
            TestId::ApproximateEntropy => "Approximate Entropy",
            TestId::RandomExcursions => "Random Excursions",
            TestId::RandomExcursionsVariant => "Random Excursions Variant",
            TestId::Serial => "Serial",
            TestId::LinearComplexity => "Linear Complexity",
        }
    }
}

/// Suite parameters. Defaults are the reference values for 10^6-bit blocks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub alpha: f64,
    pub block_len: usize,
    pub uniformity_bins: usize,
    pub block_frequency_m: usize,
    pub longest_run_m: usize,
    pub rank_matrix_size: usize,
    pub nonoverlapping_m: usize,
    pub nonoverlapping_regions: usize,
    pub overlapping_m: usize,
    pub overlapping_region_len: usize,
    pub overlapping_k: usize,
    pub universal_l: usize,
    pub universal_q: usize,
    pub approx_entropy_m: usize,
    pub serial_m: usize,
    pub linear_complexity_m: usize,
    pub excursions_min_cycles: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            alpha: 0.01,
            block_len: 1_000_000,
            uniformity_bins: 10,
            block_frequency_m: 128,
            longest_run_m: 10_000,
            rank_matrix_size: 32,
            nonoverlapping_m: 9,
            nonoverlapping_regions: 8,
            overlapping_m: 9,
            overlapping_region_len: 1032,
            overlapping_k: 5,
            universal_l: 7,
            universal_q: 1280,
            approx_entropy_m: 10,
            serial_m: 16,
            linear_complexity_m: 500,
            excursions_min_cycles: 500,
        }
    }
}

impl SuiteConfig {
    pub fn with_block_len(block_len: usize) -> Self {
        SuiteConfig { block_len, ..SuiteConfig::default() }
    }
}

/// Result of one test on one block.
#[derive(Clone, Debug, PartialEq)]
pub enum TestResult {
    PValues(Vec<f64>),
    NotApplicable,
}

/// Runs a single test on a block, yielding one p-value per sub-statistic.
pub fn run_test(
    block: &BlockView<'_>,
    test: TestId,
    config: &SuiteConfig,
) -> Result<TestResult, NistError> {
    if block.len() != config.block_len {
        return Err(NistError::BlockLengthMismatch {
            expected: config.block_len,
            got: block.len(),
        });
    }
    let p = match test {
        TestId::Frequency => TestResult::PValues(vec![basic::frequency(block)]),
        TestId::BlockFrequency => {
            TestResult::PValues(vec![basic::block_frequency(block, config.block_frequency_m)?])
        }
        TestId::CumulativeSums => TestResult::PValues(basic::cumulative_sums(block).to_vec()),
        TestId::Runs => TestResult::PValues(vec![basic::runs(block)]),
        TestId::LongestRun => {
            TestResult::PValues(vec![basic::longest_run(block, config.longest_run_m)?])
        }
        TestId::Rank => TestResult::PValues(vec![rank::rank_test(block, config.rank_matrix_size)?]),
        TestId::Fft => TestResult::PValues(vec![fft::fft_test(block)]),
        TestId::NonOverlappingTemplate => TestResult::PValues(template::non_overlapping_all(
            block,
            config.nonoverlapping_m,
            config.nonoverlapping_regions,
        )?),
        TestId::OverlappingTemplate => TestResult::PValues(vec![template::overlapping(
            block,
            config.overlapping_m,
            config.overlapping_region_len,
            config.overlapping_k,
        )?]),
        TestId::Universal => {
            TestResult::PValues(vec![universal::universal(block, config.universal_l, config.universal_q)?])
        }
        TestId::ApproximateEntropy => TestResult::PValues(vec![entropy::approximate_entropy(
            block,
            config.approx_entropy_m,
        )?]),
        TestId::RandomExcursions => {
            match excursions::random_excursions(block, config.excursions_min_cycles) {
                Some(ps) => TestResult::PValues(ps),
                None => TestResult::NotApplicable,
            }
        }
        TestId::RandomExcursionsVariant => {
            match excursions::random_excursions_variant(block, config.excursions_min_cycles) {
                Some(ps) => TestResult::PValues(ps),
                None => TestResult::NotApplicable,
            }
        }
        TestId::Serial => TestResult::PValues(entropy::serial(block, config.serial_m)?.to_vec()),
        TestId::LinearComplexity => {
            TestResult::PValues(vec![complexity::linear_complexity(block, config.linear_complexity_m)?])
        }
    };
    Ok(p)
}

/// Human-readable label for sub-statistic `sub` of `test`.
pub fn sub_label(test: TestId, sub: usize, config: &SuiteConfig) -> String {
    match test {
        TestId::CumulativeSums => ["forward", "backward"][sub].to_string(),
        TestId::Serial => ["del1", "del2"][sub].to_string(),
        TestId::NonOverlappingTemplate => {
            let tpl = &template::aperiodic_templates(config.nonoverlapping_m)[sub];
            tpl.iter().map(|&b| char::from(b'0' + b)).collect()
        }
        TestId::RandomExcursions => format!("x={}", excursions::EXCURSION_STATES[sub]),
        TestId::RandomExcursionsVariant => format!("x={}", excursions::VARIANT_STATES[sub]),
        _ => String::new(),
    }
}

/// Minimum pass proportion for `n_blocks` at significance `alpha`:
/// `(1 - alpha) - 3 sqrt(alpha (1 - alpha) / n)`.
pub fn proportion_threshold(n_blocks: usize, alpha: f64) -> f64 {
    assert!(n_blocks >= 1);
    (1.0 - alpha) - 3.0 * (alpha * (1.0 - alpha) / n_blocks as f64).sqrt()
}

/// Chi-square uniformity P-value of a p-value sample over 10 equal bins.
pub fn uniformity_pvalue(p_values: &[f64]) -> f64 {
    uniformity_pvalue_binned(p_values, 10)
}

pub fn uniformity_pvalue_binned(p_values: &[f64], bins: usize) -> f64 {
    if p_values.is_empty() {
        return 1.0;
    }
    let mut counts = vec![0u64; bins];
    for &p in p_values {
        let bin = ((p * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    let expected = p_values.len() as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    igamc((bins as f64 - 1.0) / 2.0, chi2 / 2.0)
}

/// Aggregated outcome of one sub-statistic across all blocks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubOutcome {
    pub test: TestId,
    pub sub: usize,
    pub label: String,
    /// Blocks where the test applied.
    pub applicable: usize,
    /// Fraction of applicable blocks with p >= alpha.
    pub proportion: f64,
    /// Minimum passing proportion for this applicable count.
    pub threshold: f64,
    pub uniformity_p: f64,
    pub pass: bool,
    /// Applicable blocks scoring p < alpha.
    pub failing_blocks: Vec<usize>,
    /// Per-block p-values (block index, p); not serialized into reports.
    #[serde(skip)]
    pub p_values: Vec<(usize, f64)>,
}

/// One displayed row per test, Fig.-3 style: the minimum-proportion
/// sub-statistic provides the displayed pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestRow {
    pub test: TestId,
    pub name: String,
    pub p_value: f64,
    pub proportion: f64,
    pub applicable: usize,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Success,
    Failure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub alpha: f64,
    pub block_len: usize,
    pub block_count: usize,
    pub verdict: Verdict,
    pub rows: Vec<TestRow>,
    pub outcomes: Vec<SubOutcome>,
}

impl SuiteReport {
    /// Union of failing-block attributions over all failing sub-statistics.
    pub fn failing_blocks_union(&self) -> std::collections::BTreeSet<usize> {
        self.outcomes
            .iter()
            .filter(|o| !o.pass)
            .flat_map(|o| o.failing_blocks.iter().copied())
            .collect()
    }

    /// Plain-text table mirroring the reference report layout.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28}{:>10}  {:>10}\n",
            "Statistical test", "P value", "Proportion"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<28}{:>10.4}  {:>10.4}{}\n",
                row.name,
                row.p_value,
                row.proportion,
                if row.pass { "" } else { "  *FAIL*" }
            ));
        }
        out.push_str(&format!(
            "Result                      {}\n",
            match self.verdict {
                Verdict::Success => "Success",
                Verdict::Failure => "Failure",
            }
        ));
        out
    }
}

/// Number of sub-statistics each test reports under `config`.
fn sub_count(test: TestId, config: &SuiteConfig) -> usize {
    match test {
        TestId::CumulativeSums | TestId::Serial => 2,
        TestId::NonOverlappingTemplate => template::aperiodic_templates(config.nonoverlapping_m).len(),
        TestId::RandomExcursions => excursions::EXCURSION_STATES.len(),
        TestId::RandomExcursionsVariant => excursions::VARIANT_STATES.len(),
        _ => 1,
    }
}

/// Runs all fifteen tests on every block and aggregates per sub-statistic.
/// Blocks fan out across threads; aggregation is index-ordered and therefore
/// reproducible regardless of scheduling.
pub fn run_suite(blocks: &[BlockView<'_>], config: &SuiteConfig) -> Result<SuiteReport, NistError> {
    assert!(!blocks.is_empty(), "need at least one block");
    let per_block: Vec<Vec<TestResult>> = blocks
        .par_iter()
        .map(|block| {
            ALL_TESTS
                .iter()
                .map(|&t| run_test(block, t, config))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut outcomes = Vec::new();
    let mut rows = Vec::new();
    for (t_idx, &test) in ALL_TESTS.iter().enumerate() {
        let subs = sub_count(test, config);
        let mut test_outcomes = Vec::with_capacity(subs);
        for sub in 0..subs {
            let mut p_values = Vec::new();
            for (block_idx, results) in per_block.iter().enumerate() {
                if let TestResult::PValues(ps) = &results[t_idx] {
                    p_values.push((block_idx, ps[sub]));
                }
            }
            let applicable = p_values.len();
            let (proportion, threshold, uniformity_p, pass, failing) = if applicable == 0 {
                (1.0, 0.0, 1.0, true, Vec::new())
            } else {
                let passing = p_values.iter().filter(|(_, p)| *p >= config.alpha).count();
                let proportion = passing as f64 / applicable as f64;
                let threshold = proportion_threshold(applicable, config.alpha);
                let flat: Vec<f64> = p_values.iter().map(|(_, p)| *p).collect();
                let uniformity_p = uniformity_pvalue_binned(&flat, config.uniformity_bins);
                let failing: Vec<usize> = p_values
                    .iter()
                    .filter(|(_, p)| *p < config.alpha)
                    .map(|(b, _)| *b)
                    .collect();
                let pass = uniformity_p > UNIFORMITY_MIN && proportion > threshold;
                (proportion, threshold, uniformity_p, pass, failing)
            };
            test_outcomes.push(SubOutcome {
                test,
                sub,
                label: sub_label(test, sub, config),
                applicable,
                proportion,
                threshold,
                uniformity_p,
                pass,
                failing_blocks: failing,
                p_values,
            });
        }

        // displayed pair: the minimum-proportion sub-statistic
        let display = test_outcomes
            .iter()
            .min_by(|a, b| a.proportion.total_cmp(&b.proportion))
            .expect("at least one sub-statistic");
        rows.push(TestRow {
            test,
            name: test.name().to_string(),
            p_value: display.uniformity_p,
            proportion: display.proportion,
            applicable: display.applicable,
            pass: test_outcomes.iter().all(|o| o.pass),
        });
        outcomes.extend(test_outcomes);
    }

    let verdict = if rows.iter().all(|r| r.pass) { Verdict::Success } else { Verdict::Failure };
    Ok(SuiteReport {
        alpha: config.alpha,
        block_len: config.block_len,
        block_count: blocks.len(),
        verdict,
        rows,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitio::BitSequence;

    #[test]
    fn threshold_values() {
        assert!((proportion_threshold(1000, 0.01) - 0.9805607204).abs() < 1e-9);
        assert!((proportion_threshold(100, 0.01) - 0.9601503769).abs() < 1e-9);
        assert_eq!(proportion_threshold(1000, 0.0), 1.0);
        assert_eq!(format!("{:.6}", proportion_threshold(1000, 0.01)), "0.980561");
    }

    #[test]
    fn uniformity_extremes() {
        let clumped = vec![0.05; 1000];
        assert!(uniformity_pvalue(&clumped) < 1e-300);
        let centered: Vec<f64> =
            (0..10).flat_map(|i| std::iter::repeat((i as f64 + 0.5) / 10.0).take(100)).collect();
        assert_eq!(uniformity_pvalue(&centered), 1.0);
    }

    #[test]
    fn uniformity_of_uniform_samples() {
        // seeded uniform p-values should almost never fail the 1e-4 cut
        let mut state = 5u64;
        let mut failures = 0;
        for _ in 0..200 {
            let ps: Vec<f64> = (0..1000)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (state >> 11) as f64 / (1u64 << 53) as f64
                })
                .collect();
            if uniformity_pvalue(&ps) <= UNIFORMITY_MIN {
                failures += 1;
            }
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn suite_on_zero_blocks_fails_hard() {
        let seq = BitSequence::zeros(40_000);
        let config = SuiteConfig {
            block_len: 10_000,
            longest_run_m: 128,
            universal_l: 2,
            universal_q: 40,
            approx_entropy_m: 5,
            serial_m: 6,
            linear_complexity_m: 500,
            overlapping_region_len: 1000,
            ..SuiteConfig::default()
        };
        let seq_part = seq.partition(config.block_len);
        let report = run_suite(&seq_part.blocks, &config).unwrap();
        assert_eq!(report.verdict, Verdict::Failure);
        let freq_row = &report.rows[0];
        assert_eq!(freq_row.test, TestId::Frequency);
        assert_eq!(freq_row.proportion, 0.0);
        // all-zero walk never returns to the origin: excursions not applicable
        let excursion_row = report.rows.iter().find(|r| r.test == TestId::RandomExcursions).unwrap();
        assert_eq!(excursion_row.applicable, 0);
    }

    #[test]
    fn suite_deterministic_across_runs() {
        let seq = crate::rbg::generate(&crate::rbg::RbgConfig::with_defaults(
            crate::rbg::Source::Pseudorandom { seed: 77 },
            80_000,
        ))
        .unwrap();
        let config = SuiteConfig {
            block_len: 20_000,
            longest_run_m: 128,
            universal_l: 5,
            universal_q: 320,
            approx_entropy_m: 7,
            serial_m: 9,
            ..SuiteConfig::default()
        };
        let part = seq.partition(config.block_len);
        let a = run_suite(&part.blocks, &config).unwrap();
        let b = run_suite(&part.blocks, &config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
