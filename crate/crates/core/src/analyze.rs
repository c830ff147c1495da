//! Randomness-strength scoring by minimal embeddable K, plus the two repair
//! procedures for embedded sequences that fail certification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitio::BitSequence;
use crate::embed::{self, EmbedError, EmbedKey, Keying, SegmentGeometry, SkipList};
use crate::nist::{self, NistError, SuiteConfig, SuiteReport, Verdict};

#[derive(Error, Debug)]
pub enum AnalyzeError {
    #[error("suite report carries no failure attribution")]
    NoFailureAttribution,
    #[error("insufficient fresh bits: need {needed}, got {got}")]
    InsufficientFreshBits { needed: usize, got: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Nist(#[from] NistError),
}

/// How the sweep derives a key for each grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum KeyFamily {
    /// Scheme 1: parity over all K-1 preceding bits.
    FullMask,
    /// A fresh random mask per (K, trial), derived from this seed.
    RandomMask { seed: u64 },
}

impl KeyFamily {
    fn key_for(&self, k: usize, g: i64, trial: usize) -> Result<EmbedKey, EmbedError> {
        match self {
            KeyFamily::FullMask => EmbedKey::full_mask(SegmentGeometry::new(k, g)?),
            KeyFamily::RandomMask { seed } => {
                let mix = seed
                    .wrapping_mul(0x9e3779b97f4a7c15)
                    .wrapping_add((k as u64) << 32)
                    .wrapping_add(trial as u64);
                embed::keygen(k, g, mix)
            }
        }
    }
}

/// Outcome of one (K, trial) sweep cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub verdict: Verdict,
    /// Passed without excluding any block.
    pub clean_pass: bool,
    /// Blocks excluded by skip-repair (0 when none was needed or allowed).
    pub removed_blocks: usize,
    /// Names of the tests that still failed, when the trial failed.
    pub failing_tests: Vec<String>,
}

/// Sweep results for one K.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrengthPoint {
    pub k: usize,
    pub g: i64,
    pub trials: Vec<TrialOutcome>,
    /// Fraction of trials that passed (with repair allowed).
    pub pass_probability: f64,
}

/// Full strength report: the grid (ascending K) and the minimal passing K.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrengthReport {
    pub grid: Vec<StrengthPoint>,
    /// Smallest K whose pass probability is 1.0, if any.
    pub minimal_passing_k: Option<usize>,
}

/// Options for [`strength_sweep`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepOptions {
    pub key_family: KeyFamily,
    pub trials: usize,
    /// Skip-repair is attempted only when the failing-block fraction is at
    /// most this much; wholesale exclusion would trivialize the verdict.
    pub max_skip_fraction: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { key_family: KeyFamily::FullMask, trials: 1, max_skip_fraction: 0.05 }
    }
}

/// The A1-style default grid.
pub fn default_grid() -> Vec<usize> {
    vec![9, 10, 11, 13, 20, 23, 27, 36, 45, 54, 63, 72, 81, 90, 99, 108]
}

/// Embeds a fixed scheme at each K in the grid, certifies the result (with
/// bounded skip-repair), and reports verdicts and pass probabilities.
pub fn strength_sweep(
    carrier: &BitSequence,
    k_grid: &[usize],
    g: i64,
    suite_config: &SuiteConfig,
    options: &SweepOptions,
) -> Result<StrengthReport, AnalyzeError> {
    let mut grid_sorted: Vec<usize> = k_grid.to_vec();
    grid_sorted.sort_unstable();
    grid_sorted.dedup();

    let n_blocks = carrier.len() / suite_config.block_len;
    let max_skip = (options.max_skip_fraction * n_blocks as f64).floor() as usize;

    let mut grid = Vec::with_capacity(grid_sorted.len());
    for &k in &grid_sorted {
        SegmentGeometry::new(k, g)?;
        let mut trials = Vec::with_capacity(options.trials);
        for trial in 0..options.trials {
            let key = options.key_family.key_for(k, g, trial)?;
            let keying = Keying::Single(key);
            trials.push(certify_with_repair(
                carrier,
                &keying,
                suite_config,
                max_skip,
            )?);
            trials.last_mut().unwrap().trial = trial;
        }
        let passes = trials.iter().filter(|t| t.verdict == Verdict::Success).count();
        grid.push(StrengthPoint {
            k,
            g,
            pass_probability: passes as f64 / options.trials.max(1) as f64,
            trials,
        });
    }

    let minimal_passing_k = grid
        .iter()
        .find(|p| p.pass_probability == 1.0)
        .map(|p| p.k);
    Ok(StrengthReport { grid, minimal_passing_k })
}

fn certify_with_repair(
    carrier: &BitSequence,
    keying: &Keying,
    suite_config: &SuiteConfig,
    max_skip: usize,
) -> Result<TrialOutcome, AnalyzeError> {
    let embedded = embed::embed_fixed(carrier, keying, &SkipList::empty(), suite_config.block_len)?;
    let report = run_suite_on(&embedded, suite_config)?;
    if report.verdict == Verdict::Success {
        return Ok(TrialOutcome {
            trial: 0,
            verdict: Verdict::Success,
            clean_pass: true,
            removed_blocks: 0,
            failing_tests: Vec::new(),
        });
    }
    let failing = report.failing_blocks_union();
    if !failing.is_empty() && failing.len() <= max_skip {
        let (repaired, skip) = repair_skip(carrier, keying, &report)?;
        let re_report = run_suite_on(&repaired, suite_config)?;
        if re_report.verdict == Verdict::Success {
            return Ok(TrialOutcome {
                trial: 0,
                verdict: Verdict::Success,
                clean_pass: false,
                removed_blocks: skip.len(),
                failing_tests: Vec::new(),
            });
        }
    }
    Ok(TrialOutcome {
        trial: 0,
        verdict: Verdict::Failure,
        clean_pass: false,
        removed_blocks: 0,
        failing_tests: report
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name.clone())
            .collect(),
    })
}

fn run_suite_on(seq: &BitSequence, config: &SuiteConfig) -> Result<SuiteReport, NistError> {
    let part = seq.partition(config.block_len);
    nist::run_suite(&part.blocks, config)
}

/// Re-embeds the carrier, exempting every block the report attributes to a
/// failing sub-statistic. Returns the repaired sequence and the skip list,
/// which is key material the decoder needs out of band.
pub fn repair_skip(
    carrier: &BitSequence,
    keying: &Keying,
    report: &SuiteReport,
) -> Result<(BitSequence, SkipList), AnalyzeError> {
    if report.outcomes.is_empty() {
        return Err(AnalyzeError::NoFailureAttribution);
    }
    let skip = SkipList(report.failing_blocks_union());
    let repaired = embed::embed_fixed(carrier, keying, &skip, report.block_len)?;
    Ok((repaired, skip))
}

/// Deletes the failing blocks, shifts the remaining blocks up in order, and
/// appends an equal number of fresh blocks; the tail (and total length) is
/// preserved.
pub fn repair_replace(
    carrier: &BitSequence,
    failing_blocks: &SkipList,
    fresh: &BitSequence,
    block_len: usize,
) -> Result<BitSequence, AnalyzeError> {
    let n_blocks = carrier.len() / block_len;
    let failing: Vec<usize> =
        failing_blocks.0.iter().copied().filter(|&b| b < n_blocks).collect();
    let needed = failing.len() * block_len;
    if fresh.len() < needed {
        return Err(AnalyzeError::InsufficientFreshBits { needed, got: fresh.len() });
    }
    let mut out = BitSequence::zeros(carrier.len());
    let mut write_pos = 0usize;
    let copy_block = |out: &mut BitSequence, src: &BitSequence, src_off: usize, pos: usize| {
        for i in 0..block_len {
            out.set(pos + i, src.get(src_off + i));
        }
    };
    for block in 0..n_blocks {
        if failing.binary_search(&block).is_ok() {
            continue;
        }
        copy_block(&mut out, carrier, block * block_len, write_pos);
        write_pos += block_len;
    }
    for (i, _) in failing.iter().enumerate() {
        copy_block(&mut out, fresh, i * block_len, write_pos);
        write_pos += block_len;
    }
    // tail is carried over unchanged
    for i in n_blocks * block_len..carrier.len() {
        out.set(i, carrier.get(i));
    }
    Ok(out)
}
