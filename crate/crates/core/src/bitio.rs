//! Packed bit sequences, block partitioning, and `.bits`/ASCII serialization.
//!
//! Bits are stored MSB-first within each byte; index 0 is the most significant
//! bit of byte 0. Trailing pad bits in the final byte are always zero.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

/// Magic prefix of the packed `.bits` file format.
pub const BITS_MAGIC: &[u8; 8] = b"RNDEMBED";
/// Current `.bits` format version.
pub const BITS_VERSION: u16 = 1;

#[derive(Error, Debug)]
pub enum BitIoError {
    #[error("invalid character at position {0}: expected '0', '1', or whitespace")]
    InvalidCharacter(usize),
    #[error("truncated stream: needed {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("bad magic: not a RNDEMBED .bits file")]
    BadMagic,
    #[error("unsupported .bits version {0}")]
    UnsupportedVersion(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An immutable sequence of bits packed MSB-first into bytes.
///
/// Construction validates the pad-bit invariant; mutation happens only
/// through copy-and-modify (see [`BitSequence::set`] uses within the crate).
#[derive(Clone, PartialEq, Eq)]
pub struct BitSequence {
    bytes: Vec<u8>,
    len: usize,
}

impl BitSequence {
    /// An empty sequence.
    pub fn new() -> Self {
        BitSequence { bytes: Vec::new(), len: 0 }
    }

    /// A zero-filled sequence of `len` bits.
    pub fn zeros(len: usize) -> Self {
        BitSequence { bytes: vec![0u8; len.div_ceil(8)], len }
    }

    /// Builds a sequence from one `0`/`1` value per element.
    pub fn from_bits<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut seq = BitSequence::new();
        for b in iter {
            seq.push(b & 1 == 1);
        }
        seq
    }

    /// Parses an ASCII string of `0`/`1` digits; whitespace is ignored.
    pub fn from_ascii(text: &str) -> Result<Self, BitIoError> {
        let mut seq = BitSequence::new();
        for (pos, ch) in text.bytes().enumerate() {
            match ch {
                b'0' => seq.push(false),
                b'1' => seq.push(true),
                b' ' | b'\t' | b'\r' | b'\n' => {}
                _ => return Err(BitIoError::InvalidCharacter(pos)),
            }
        }
        Ok(seq)
    }

    /// Reads `bit_count` bits from a packed MSB-first byte stream.
    pub fn read_packed(bytes: &[u8], bit_count: usize) -> Result<Self, BitIoError> {
        let needed = bit_count.div_ceil(8);
        if bytes.len() < needed {
            return Err(BitIoError::Truncated { needed, got: bytes.len() });
        }
        let mut out = bytes[..needed].to_vec();
        // clear pad bits so equality and hashing stay canonical
        if bit_count % 8 != 0 {
            let keep = bit_count % 8;
            let last = out.len() - 1;
            out[last] &= 0xffu8 << (8 - keep);
        }
        Ok(BitSequence { bytes: out, len: bit_count })
    }

    /// Packs the sequence MSB-first, zero-padding the final byte.
    pub fn write_packed(&self) -> Vec<u8> {
        self.bytes.clone()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit at position `i` (0-based). Panics if out of range.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        unsafe { self.get_unchecked(i) }
    }

    #[inline]
    pub(crate) unsafe fn get_unchecked(&self, i: usize) -> bool {
        let byte = *self.bytes.get_unchecked(i >> 3);
        (byte >> (7 - (i & 7))) & 1 == 1
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        let mask = 1u8 << (7 - (i & 7));
        if value {
            self.bytes[i >> 3] |= mask;
        } else {
            self.bytes[i >> 3] &= !mask;
        }
    }

    pub(crate) fn push(&mut self, value: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        self.len += 1;
        if value {
            let i = self.len - 1;
            self.bytes[i >> 3] |= 1u8 << (7 - (i & 7));
        }
    }

    /// Iterates bits as `bool` in index order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(move |i| unsafe { self.get_unchecked(i) })
    }

    /// Shortens the sequence to `len` bits, zeroing freed pad bits.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.bytes.truncate(len.div_ceil(8));
        if len % 8 != 0 {
            let keep = len % 8;
            let last = self.bytes.len() - 1;
            self.bytes[last] &= 0xffu8 << (8 - keep);
        }
    }

    /// Number of one bits.
    pub fn count_ones(&self) -> u64 {
        self.bytes.iter().map(|b| b.count_ones() as u64).sum()
    }

    #[inline]
    pub(crate) fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Renders as an ASCII string of `0`/`1` digits.
    pub fn to_ascii(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    /// Splits into `floor(len / block_len)` full blocks plus an explicit tail
    /// view holding the remainder bits.
    pub fn partition(&self, block_len: usize) -> Partition<'_> {
        assert!(block_len >= 1, "block_len must be >= 1");
        let n_blocks = self.len / block_len;
        let blocks = (0..n_blocks)
            .map(|i| BlockView {
                parent: self,
                block_index: i,
                offset: i * block_len,
                len: block_len,
            })
            .collect();
        let tail_offset = n_blocks * block_len;
        Partition {
            blocks,
            tail: BlockView {
                parent: self,
                block_index: n_blocks,
                offset: tail_offset,
                len: self.len - tail_offset,
            },
        }
    }

    /// Writes the `.bits` container: magic, version (u16 LE), bit count
    /// (u64 LE), then packed data.
    pub fn write_bits_file<W: Write>(&self, mut w: W) -> Result<(), BitIoError> {
        w.write_all(BITS_MAGIC)?;
        w.write_all(&BITS_VERSION.to_le_bytes())?;
        w.write_all(&(self.len as u64).to_le_bytes())?;
        w.write_all(&self.bytes)?;
        Ok(())
    }

    /// Reads the `.bits` container written by [`write_bits_file`](Self::write_bits_file).
    pub fn read_bits_file<R: Read>(mut r: R) -> Result<Self, BitIoError> {
        let mut header = [0u8; 18];
        r.read_exact(&mut header).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                BitIoError::Truncated { needed: 18, got: 0 }
            } else {
                BitIoError::Io(e)
            }
        })?;
        if &header[..8] != BITS_MAGIC {
            return Err(BitIoError::BadMagic);
        }
        let version = u16::from_le_bytes([header[8], header[9]]);
        if version != BITS_VERSION {
            return Err(BitIoError::UnsupportedVersion(version));
        }
        let bit_count = u64::from_le_bytes(header[10..18].try_into().unwrap()) as usize;
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        BitSequence::read_packed(&data, bit_count)
    }

    /// Loads from a path, auto-detecting packed `.bits` vs ASCII by the magic.
    pub fn load(path: &Path) -> Result<Self, BitIoError> {
        let data = std::fs::read(path)?;
        if data.len() >= 8 && &data[..8] == BITS_MAGIC {
            BitSequence::read_bits_file(&data[..])
        } else {
            let text = String::from_utf8_lossy(&data);
            BitSequence::from_ascii(&text)
        }
    }
}

impl Default for BitSequence {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "BitSequence({})", self.to_ascii())
        } else {
            write!(f, "BitSequence(len={})", self.len)
        }
    }
}

/// A view of one fixed-length block of a parent sequence.
#[derive(Clone, Copy)]
pub struct BlockView<'a> {
    parent: &'a BitSequence,
    /// 0-based ordinal among the full blocks.
    pub block_index: usize,
    /// Bit offset of the block within the parent.
    pub offset: usize,
    /// Block length in bits.
    pub len: usize,
}

impl<'a> BlockView<'a> {
    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        unsafe { self.parent.get_unchecked(self.offset + i) }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Iterates the block's bits in order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + 'a {
        let parent = self.parent;
        let offset = self.offset;
        (0..self.len).map(move |i| unsafe { parent.get_unchecked(offset + i) })
    }

    /// Number of one bits, byte-accelerated when the view is byte-aligned.
    pub fn count_ones(&self) -> u64 {
        if self.offset % 8 == 0 && self.len % 8 == 0 {
            let bytes = self.parent.as_bytes();
            bytes[self.offset / 8..(self.offset + self.len) / 8]
                .iter()
                .map(|b| b.count_ones() as u64)
                .sum()
        } else {
            self.iter().map(u64::from).sum()
        }
    }

    /// Copies the block into a fresh sequence.
    pub fn to_sequence(&self) -> BitSequence {
        BitSequence::from_bits(self.iter().map(u8::from))
    }
}

/// Result of [`BitSequence::partition`]: full blocks plus the remainder tail.
pub struct Partition<'a> {
    pub blocks: Vec<BlockView<'a>>,
    /// Remainder bits after the last full block; may be empty.
    pub tail: BlockView<'a>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_ascii_basic() {
        let s = BitSequence::from_ascii("1011").unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.to_ascii(), "1011");
    }

    #[test]
    fn from_ascii_empty() {
        let s = BitSequence::from_ascii("").unwrap();
        assert_eq!(s.len(), 0);
    }

    #[test]
    fn from_ascii_whitespace() {
        let s = BitSequence::from_ascii("10 11\n01").unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.to_ascii(), "101101");
    }

    #[test]
    fn from_ascii_rejects_other_bytes() {
        let err = BitSequence::from_ascii("10x1").unwrap_err();
        match err {
            BitIoError::InvalidCharacter(pos) => assert_eq!(pos, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn packed_msb_first() {
        let s = BitSequence::read_packed(&[0xA5], 8).unwrap();
        assert_eq!(s.to_ascii(), "10100101");
        let s = BitSequence::read_packed(&[0x80], 1).unwrap();
        assert_eq!(s.to_ascii(), "1");
    }

    #[test]
    fn packed_pad_zeros() {
        let s = BitSequence::from_ascii("111").unwrap();
        assert_eq!(s.write_packed(), vec![0xE0]);
    }

    #[test]
    fn packed_truncated() {
        let err = BitSequence::read_packed(&[0xff], 9).unwrap_err();
        match err {
            BitIoError::Truncated { needed, got } => {
                assert_eq!((needed, got), (2, 1));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn partition_counts() {
        let s = BitSequence::zeros(25);
        let p = s.partition(10);
        assert_eq!(p.blocks.len(), 2);
        assert_eq!(p.tail.len(), 5);
        assert_eq!(p.tail.offset, 20);

        let s = BitSequence::zeros(5);
        let p = s.partition(10);
        assert_eq!(p.blocks.len(), 0);
        assert_eq!(p.tail.len(), 5);
    }

    #[test]
    fn partition_reassembles() {
        let s = BitSequence::from_ascii("1101001110110101001").unwrap();
        let p = s.partition(5);
        let mut joined = String::new();
        for b in &p.blocks {
            joined.push_str(&b.to_sequence().to_ascii());
        }
        joined.push_str(&p.tail.to_sequence().to_ascii());
        assert_eq!(joined, s.to_ascii());
    }

    #[test]
    fn bits_file_roundtrip() {
        let s = BitSequence::from_ascii("101100111000101").unwrap();
        let mut buf = Vec::new();
        s.write_bits_file(&mut buf).unwrap();
        assert_eq!(&buf[..8], BITS_MAGIC);
        let back = BitSequence::read_bits_file(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn packed_roundtrip_exhaustive_short() {
        // all lengths 0..=64 with pseudo-random content
        let mut state = 0x9e3779b97f4a7c15u64;
        for len in 0..=64usize {
            let mut s = BitSequence::new();
            for _ in 0..len {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                s.push(state >> 63 == 1);
            }
            let packed = s.write_packed();
            let back = BitSequence::read_packed(&packed, len).unwrap();
            assert_eq!(back, s, "len {len}");
        }
    }
}
