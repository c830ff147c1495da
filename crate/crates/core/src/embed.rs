//! Parity-subset embedding: segment geometry, private keys, key schedules,
//! fixed-scheme and message embedding, extraction, and verification.
//!
//! Each block is walked in segments of `K` bits separated by gaps of `G`
//! bits (`G` may be negative, overlapping consecutive segments). The last
//! bit of a segment — the target — is set to the parity of a keyed subset
//! of the segment's first `K-1` bits, optionally XORed with a data bit.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigUint;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitio::BitSequence;

#[derive(Error, Debug)]
pub enum EmbedError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("message too long: capacity is {capacity} bits")]
    MessageTooLong { capacity: usize },
    #[error("requested count exceeds capacity of {capacity} bits")]
    CountExceedsCapacity { capacity: usize },
    #[error("skip index {index} out of range for {blocks} blocks")]
    InvalidSkipIndex { index: usize, blocks: usize },
    #[error("key file line {line}: {msg}")]
    KeyParse { line: usize, msg: String },
}

/// Segment length `K` and gap `G` (negative `G` overlaps segments).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentGeometry {
    pub k: usize,
    pub g: i64,
}

impl SegmentGeometry {
    pub fn new(k: usize, g: i64) -> Result<Self, EmbedError> {
        let geo = SegmentGeometry { k, g };
        geo.validate()?;
        Ok(geo)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.k < 2 {
            return Err(EmbedError::InvalidGeometry(format!("K = {} must be >= 2", self.k)));
        }
        if self.k as i64 + self.g < 1 {
            return Err(EmbedError::InvalidGeometry(format!(
                "stride K + G = {} must be >= 1",
                self.k as i64 + self.g
            )));
        }
        Ok(())
    }

    /// Distance between consecutive segment starts.
    #[inline]
    pub fn stride(&self) -> usize {
        (self.k as i64 + self.g) as usize
    }

    /// `(start, target)` positions of segment `n` within a block.
    #[inline]
    pub fn segment_bounds(&self, n: usize) -> (usize, usize) {
        let start = n * self.stride();
        (start, start + self.k - 1)
    }

    /// Number of whole segments that fit in a block of `block_len` bits.
    pub fn segment_count(&self, block_len: usize) -> usize {
        if block_len < self.k {
            0
        } else {
            (block_len - self.k) / self.stride() + 1
        }
    }

    /// Fraction of potentially modified bits, exactly `1 / (K + G)`.
    pub fn ratio(&self) -> f64 {
        1.0 / self.stride() as f64
    }
}

/// A private embedding key: geometry plus the 1-based within-segment offsets
/// whose parity defines the target bit. Offsets lie in `1..=K-1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedKey {
    pub geometry: SegmentGeometry,
    mask: Vec<u32>,
    contiguous: bool,
}

impl EmbedKey {
    pub fn new(geometry: SegmentGeometry, mask: Vec<u32>) -> Result<Self, EmbedError> {
        geometry.validate()?;
        let mut mask = mask;
        mask.sort_unstable();
        mask.dedup();
        if mask.is_empty() {
            return Err(EmbedError::InvalidMask("mask must be nonempty".into()));
        }
        let max = *mask.last().unwrap() as usize;
        let min = mask[0];
        if min < 1 || max > geometry.k - 1 {
            return Err(EmbedError::InvalidMask(format!(
                "offsets must lie in 1..={}, got {min}..={max}",
                geometry.k - 1
            )));
        }
        let contiguous = mask.len() == (max - mask[0] as usize + 1);
        Ok(EmbedKey { geometry, mask, contiguous })
    }

    /// Scheme-1 key: parity over all `K-1` preceding bits.
    pub fn full_mask(geometry: SegmentGeometry) -> Result<Self, EmbedError> {
        let mask = (1..geometry.k as u32).collect();
        EmbedKey::new(geometry, mask)
    }

    /// Scheme-2 key: parity of the two bits at offsets `m` and `m + q`.
    pub fn two_bit(geometry: SegmentGeometry, m: u32, q: u32) -> Result<Self, EmbedError> {
        EmbedKey::new(geometry, vec![m, m + q])
    }

    pub fn mask(&self) -> &[u32] {
        &self.mask
    }
}

/// An ordered list of `(key, segment_count)` entries applied cyclically
/// along each block, restarting at every block boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySchedule {
    pub entries: Vec<(EmbedKey, usize)>,
}

impl KeySchedule {
    pub fn new(entries: Vec<(EmbedKey, usize)>) -> Result<Self, EmbedError> {
        if entries.is_empty() {
            return Err(EmbedError::InvalidGeometry("schedule must be nonempty".into()));
        }
        for (key, count) in &entries {
            key.geometry.validate()?;
            if *count < 1 {
                return Err(EmbedError::InvalidGeometry(
                    "schedule segment_count must be >= 1".into(),
                ));
            }
        }
        Ok(KeySchedule { entries })
    }
}

/// Either a single key or a schedule; every embedding operation accepts both.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Keying {
    Single(EmbedKey),
    Schedule(KeySchedule),
}

impl Keying {
    pub fn validate(&self) -> Result<(), EmbedError> {
        match self {
            Keying::Single(k) => k.geometry.validate(),
            Keying::Schedule(s) => {
                KeySchedule::new(s.entries.clone())?;
                Ok(())
            }
        }
    }

    pub fn max_k(&self) -> usize {
        match self {
            Keying::Single(k) => k.geometry.k,
            Keying::Schedule(s) => s.entries.iter().map(|(k, _)| k.geometry.k).max().unwrap_or(0),
        }
    }

    /// Deterministic filler seed derived from the key material (FNV-1a over
    /// a canonical encoding), so Eq.-style filler is replayable from the key.
    pub fn derived_filler_seed(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        let mut eat = |v: u64| {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        let mut eat_key = |key: &EmbedKey, count: u64| {
            eat(key.geometry.k as u64);
            eat(key.geometry.g as u64);
            for &m in &key.mask {
                eat(m as u64);
            }
            eat(count);
        };
        match self {
            Keying::Single(k) => eat_key(k, 1),
            Keying::Schedule(s) => {
                for (k, c) in &s.entries {
                    eat_key(k, *c as u64);
                }
            }
        }
        h
    }

    /// Walks the segments of one block in order.
    fn walk(&self, block_len: usize) -> SegmentWalk<'_> {
        SegmentWalk { keying: self, block_len, cursor: 0, entry: 0, used: 0 }
    }
}

/// One segment produced by a walk: the key in force, plus absolute start and
/// target positions within the block.
struct Segment<'a> {
    key: &'a EmbedKey,
    start: usize,
    target: usize,
}

struct SegmentWalk<'a> {
    keying: &'a Keying,
    block_len: usize,
    cursor: usize,
    entry: usize,
    used: usize,
}

impl<'a> Iterator for SegmentWalk<'a> {
    type Item = Segment<'a>;

    fn next(&mut self) -> Option<Segment<'a>> {
        let key = match self.keying {
            Keying::Single(k) => k,
            Keying::Schedule(s) => {
                let (key, count) = &s.entries[self.entry];
                if self.used >= *count {
                    self.entry = (self.entry + 1) % s.entries.len();
                    self.used = 0;
                    &s.entries[self.entry].0
                } else {
                    key
                }
            }
        };
        let start = self.cursor;
        let target = start + key.geometry.k - 1;
        if target >= self.block_len {
            return None;
        }
        self.cursor = start + key.geometry.stride();
        self.used += 1;
        Some(Segment { key, start, target })
    }
}

/// Block indices exempt from embedding.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipList(pub BTreeSet<usize>);

impl SkipList {
    pub fn empty() -> Self {
        SkipList(BTreeSet::new())
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        SkipList(iter.into_iter().collect())
    }

    pub fn contains(&self, block: usize) -> bool {
        self.0.contains(&block)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn validate(&self, blocks: usize) -> Result<(), EmbedError> {
        if let Some(&index) = self.0.iter().next_back() {
            if index >= blocks {
                return Err(EmbedError::InvalidSkipIndex { index, blocks });
            }
        }
        Ok(())
    }
}

/// Number of segments per block under `keying`.
pub fn segments_per_block(keying: &Keying, block_len: usize) -> usize {
    keying.walk(block_len).count()
}

/// Embeddable bit count: the segment total over non-skipped blocks.
pub fn capacity(
    seq_len: usize,
    keying: &Keying,
    skip: &SkipList,
    block_len: usize,
) -> Result<usize, EmbedError> {
    keying.validate()?;
    let blocks = seq_len / block_len;
    skip.validate(blocks)?;
    let per_block = segments_per_block(keying, block_len);
    Ok((blocks - skip.0.iter().filter(|&&i| i < blocks).count()) * per_block)
}

/// Size of the scheme space for segment length `K`, exactly `2^(K-1)`.
pub fn key_space(k: usize) -> BigUint {
    assert!(k >= 2, "K must be >= 2");
    BigUint::from(1u8) << (k - 1)
}

/// Draws a uniformly random nonempty mask over `{1..K-1}`, deterministic
/// per seed.
pub fn keygen(k: usize, g: i64, seed: u64) -> Result<EmbedKey, EmbedError> {
    let geometry = SegmentGeometry::new(k, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mask: Vec<u32> = (1..k as u32).filter(|_| rng.gen::<bool>()).collect();
        if !mask.is_empty() {
            return EmbedKey::new(geometry, mask);
        }
    }
}

#[inline]
fn parity_at(seq: &BitSequence, block_offset: usize, seg: &Segment<'_>) -> bool {
    let key = seg.key;
    if key.contiguous {
        let from = block_offset + seg.start + key.mask[0] as usize - 1;
        let to = block_offset + seg.start + *key.mask.last().unwrap() as usize - 1;
        range_parity(seq, from, to)
    } else {
        let mut p = false;
        for &off in &key.mask {
            p ^= seq.get(block_offset + seg.start + off as usize - 1);
        }
        p
    }
}

/// Parity of the inclusive bit range `[from, to]`, byte-accelerated.
/// Pad bits in the final byte are guaranteed zero, so whole-byte popcounts
/// are safe.
fn range_parity(seq: &BitSequence, from: usize, to: usize) -> bool {
    let bytes = seq.as_bytes();
    let (first_byte, last_byte) = (from >> 3, to >> 3);
    if first_byte == last_byte {
        let b = bytes[first_byte];
        let lead = from & 7;
        let width = to - from + 1;
        let v = (b << lead) >> (8 - width) << (8 - width);
        return v.count_ones() & 1 == 1;
    }
    let mut ones = (bytes[first_byte] << (from & 7)).count_ones();
    ones += bytes[first_byte + 1..last_byte].iter().map(|b| b.count_ones()).sum::<u32>();
    let tail_width = (to & 7) + 1;
    ones += (bytes[last_byte] >> (8 - tail_width)).count_ones();
    ones & 1 == 1
}

/// Parity of the keyed subset for segment `n` of a block, per Eqs. (1)/(2)
/// style masks.
pub fn parity(block: &crate::bitio::BlockView<'_>, n: usize, key: &EmbedKey) -> bool {
    let (start, _) = key.geometry.segment_bounds(n);
    let mut p = false;
    for &off in &key.mask {
        p ^= block.bit(start + off as usize - 1);
    }
    p
}

fn embed_with<D: FnMut() -> bool>(
    seq: &BitSequence,
    keying: &Keying,
    skip: &SkipList,
    block_len: usize,
    mut data: D,
) -> Result<BitSequence, EmbedError> {
    keying.validate()?;
    let blocks = seq.len() / block_len;
    skip.validate(blocks)?;
    if block_len < keying.max_k() {
        return Err(EmbedError::InvalidGeometry(format!(
            "block length {block_len} is smaller than K = {}",
            keying.max_k()
        )));
    }
    let mut out = seq.clone();
    for block in 0..blocks {
        if skip.contains(block) {
            continue;
        }
        let offset = block * block_len;
        // Segments are processed in increasing order; with G < 0 the parity
        // inputs read the already-modified state, which is what the decoder
        // sees on the wire.
        for seg in keying.walk(block_len) {
            let p = parity_at(&out, offset, &seg);
            out.set(offset + seg.target, p ^ data());
        }
    }
    Ok(out)
}

/// Fixed-scheme embedding: every target becomes the keyed parity of its
/// segment.
pub fn embed_fixed(
    seq: &BitSequence,
    keying: &Keying,
    skip: &SkipList,
    block_len: usize,
) -> Result<BitSequence, EmbedError> {
    embed_with(seq, keying, skip, block_len, || false)
}

/// Message embedding: targets carry `parity XOR d`, where `d` runs through
/// the message bits and then through seeded uniform filler so the fixed
/// scheme never resumes detectably.
pub fn embed_message(
    seq: &BitSequence,
    keying: &Keying,
    message: &BitSequence,
    skip: &SkipList,
    block_len: usize,
) -> Result<BitSequence, EmbedError> {
    embed_message_seeded(seq, keying, message, skip, block_len, keying.derived_filler_seed())
}

/// [`embed_message`] with an explicit filler seed (used by channel sessions).
pub fn embed_message_seeded(
    seq: &BitSequence,
    keying: &Keying,
    message: &BitSequence,
    skip: &SkipList,
    block_len: usize,
    filler_seed: u64,
) -> Result<BitSequence, EmbedError> {
    let cap = capacity(seq.len(), keying, skip, block_len)?;
    if message.len() > cap {
        return Err(EmbedError::MessageTooLong { capacity: cap });
    }
    let mut filler = FillerRng::new(filler_seed);
    let mut i = 0;
    embed_with(seq, keying, skip, block_len, move || {
        let d = if i < message.len() { message.get(i) } else { filler.next_bit() };
        i += 1;
        d
    })
}

/// Recovers `bit_count` embedded-channel bits in segment order over the
/// non-skipped blocks.
pub fn extract_message(
    seq: &BitSequence,
    keying: &Keying,
    skip: &SkipList,
    block_len: usize,
    bit_count: usize,
) -> Result<BitSequence, EmbedError> {
    let cap = capacity(seq.len(), keying, skip, block_len)?;
    if bit_count > cap {
        return Err(EmbedError::CountExceedsCapacity { capacity: cap });
    }
    let blocks = seq.len() / block_len;
    let mut out = BitSequence::zeros(bit_count);
    let mut i = 0;
    'outer: for block in 0..blocks {
        if skip.contains(block) {
            continue;
        }
        let offset = block * block_len;
        for seg in keying.walk(block_len) {
            if i >= bit_count {
                break 'outer;
            }
            let p = parity_at(seq, offset, &seg);
            out.set(i, seq.get(offset + seg.target) ^ p);
            i += 1;
        }
    }
    Ok(out)
}

/// Per-block check that every target equals its keyed parity.
pub fn verify_embedding(seq: &BitSequence, keying: &Keying, block_len: usize) -> Vec<bool> {
    let blocks = seq.len() / block_len;
    (0..blocks)
        .map(|block| {
            let offset = block * block_len;
            keying
                .walk(block_len)
                .all(|seg| parity_at(seq, offset, &seg) == seq.get(offset + seg.target))
        })
        .collect()
}

/// Uniform filler-bit source for Eq.-(3)-style embedding.
pub struct FillerRng {
    rng: ChaCha8Rng,
    buf: u64,
    left: u32,
}

impl FillerRng {
    pub fn new(seed: u64) -> Self {
        FillerRng { rng: ChaCha8Rng::seed_from_u64(seed), buf: 0, left: 0 }
    }

    #[inline]
    pub fn next_bit(&mut self) -> bool {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.buf & 1 == 1;
        self.buf >>= 1;
        self.left -= 1;
        bit
    }
}

/// Key material as stored in a `.key` file.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyFile {
    pub keying: Keying,
    pub seed: Option<u64>,
}

/// Parses the line-oriented key format: `K=`, `G=`, `MASK=` for a single
/// key, repeated `SCHED=K,G,off|off|...,count` lines for a schedule, and an
/// optional `SEED=`.
pub fn parse_key_file(text: &str) -> Result<KeyFile, EmbedError> {
    let mut k: Option<usize> = None;
    let mut g: Option<i64> = None;
    let mut mask: Option<Vec<u32>> = None;
    let mut seed: Option<u64> = None;
    let mut sched: Vec<(EmbedKey, usize)> = Vec::new();

    let err = |line: usize, msg: &str| EmbedError::KeyParse { line, msg: msg.to_string() };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (field, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, "expected FIELD=value"))?;
        let value = value.trim();
        match field.trim() {
            "K" => k = Some(value.parse().map_err(|_| err(line_no, "bad K"))?),
            "G" => g = Some(value.parse().map_err(|_| err(line_no, "bad G"))?),
            "MASK" => {
                let offs = value
                    .split(',')
                    .map(|s| s.trim().parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err(line_no, "bad MASK offsets"))?;
                mask = Some(offs);
            }
            "SEED" => seed = Some(value.parse().map_err(|_| err(line_no, "bad SEED"))?),
            "SCHED" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(err(line_no, "SCHED needs K,G,off|off|...,count"));
                }
                let sk: usize = parts[0].parse().map_err(|_| err(line_no, "bad SCHED K"))?;
                let sg: i64 = parts[1].parse().map_err(|_| err(line_no, "bad SCHED G"))?;
                let offs = parts[2]
                    .split('|')
                    .map(|s| s.trim().parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err(line_no, "bad SCHED mask"))?;
                let count: usize = parts[3].parse().map_err(|_| err(line_no, "bad SCHED count"))?;
                let key = EmbedKey::new(SegmentGeometry::new(sk, sg)?, offs)?;
                sched.push((key, count));
            }
            other => return Err(err(line_no, &format!("unknown field {other:?}"))),
        }
    }

    let keying = if !sched.is_empty() {
        Keying::Schedule(KeySchedule::new(sched)?)
    } else {
        let k = k.ok_or_else(|| err(0, "missing K"))?;
        let g = g.ok_or_else(|| err(0, "missing G"))?;
        let mask = mask.ok_or_else(|| err(0, "missing MASK"))?;
        Keying::Single(EmbedKey::new(SegmentGeometry::new(k, g)?, mask)?)
    };
    Ok(KeyFile { keying, seed })
}

/// Renders key material back into the `.key` text format.
pub fn format_key_file(key_file: &KeyFile) -> String {
    let mut out = String::new();
    let join = |mask: &[u32], sep: char| {
        mask.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(&sep.to_string())
    };
    match &key_file.keying {
        Keying::Single(key) => {
            let _ = writeln!(out, "K={}", key.geometry.k);
            let _ = writeln!(out, "G={}", key.geometry.g);
            let _ = writeln!(out, "MASK={}", join(&key.mask, ','));
        }
        Keying::Schedule(s) => {
            for (key, count) in &s.entries {
                let _ = writeln!(
                    out,
                    "SCHED={},{},{},{}",
                    key.geometry.k,
                    key.geometry.g,
                    join(&key.mask, '|'),
                    count
                );
            }
        }
    }
    if let Some(seed) = key_file.seed {
        let _ = writeln!(out, "SEED={seed}");
    }
    out
}
