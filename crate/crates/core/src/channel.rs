//! Covert private-key stream codec: frames carried inside the embedded-bit
//! channel of a continuously transmitted random stream.
//!
//! The outer stream is indistinguishable from the carrier to anyone without
//! the key: every target bit is `parity XOR d`, where `d` is frame content
//! when a message is in flight and seeded uniform filler otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitio::BitSequence;
use crate::embed::{self, EmbedError, Keying, SkipList};
use crate::nist::{self, NistError, SuiteConfig, SuiteReport};
use crate::rbg::{self, RbgConfig, RbgError};

/// Frame sync marker (CCSDS attached sync marker).
pub const SYNC_WORD: u32 = 0x1ACFFC1D;
/// Sync (32) + length (32) + CRC (32) bits around the payload.
pub const FRAME_OVERHEAD_BITS: usize = 96;

#[derive(Error, Debug)]
pub enum ChannelError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Rbg(#[from] RbgError),
    #[error(transparent)]
    Nist(#[from] NistError),
    #[error("messages need {needed} embedded bits but the stream only carries {capacity}")]
    StreamTooShort { needed: usize, capacity: usize },
}

/// A covert-channel session: key material, carrier source, block length,
/// and the filler seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelSession {
    pub keying: Keying,
    pub carrier: RbgConfig,
    pub block_len: usize,
    pub filler_seed: u64,
}

/// Decoder-side counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeDiagnostics {
    pub frames_decoded: usize,
    pub crc_failures: usize,
    pub length_overflows: usize,
}

/// CRC-32 (polynomial 0x04C11DB7 reflected, init 0xFFFFFFFF, final xor
/// 0xFFFFFFFF) over a byte slice.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}

/// CRC input: the 32-bit length then the payload bits, packed MSB-first and
/// zero-padded to a byte boundary.
fn frame_crc(length: u32, payload: &BitSequence) -> u32 {
    let mut buf = BitSequence::new();
    push_u32(&mut buf, length);
    for bit in payload.iter() {
        buf.push(bit);
    }
    crc32(&buf.write_packed())
}

fn push_u32(seq: &mut BitSequence, value: u32) {
    for i in (0..32).rev() {
        seq.push((value >> i) & 1 == 1);
    }
}

/// Serializes one frame: sync, payload bit length, payload, CRC.
pub fn encode_frame(payload: &BitSequence) -> BitSequence {
    let length = payload.len() as u32;
    let mut frame = BitSequence::new();
    push_u32(&mut frame, SYNC_WORD);
    push_u32(&mut frame, length);
    for bit in payload.iter() {
        frame.push(bit);
    }
    push_u32(&mut frame, frame_crc(length, payload));
    frame
}

/// Generates the carrier, frames the queued messages back-to-back into the
/// embedded channel, and pads the rest with uniform filler bits.
pub fn encode_stream(
    session: &ChannelSession,
    messages: &[BitSequence],
) -> Result<BitSequence, ChannelError> {
    let carrier = rbg::generate(&session.carrier)?;
    encode_into_carrier(session, &carrier, messages)
}

/// [`encode_stream`] over a caller-provided carrier.
pub fn encode_into_carrier(
    session: &ChannelSession,
    carrier: &BitSequence,
    messages: &[BitSequence],
) -> Result<BitSequence, ChannelError> {
    let mut channel_bits = BitSequence::new();
    for payload in messages {
        for bit in encode_frame(payload).iter() {
            channel_bits.push(bit);
        }
    }
    let capacity =
        embed::capacity(carrier.len(), &session.keying, &SkipList::empty(), session.block_len)?;
    if channel_bits.len() > capacity {
        return Err(ChannelError::StreamTooShort { needed: channel_bits.len(), capacity });
    }
    Ok(embed::embed_message_seeded(
        carrier,
        &session.keying,
        &channel_bits,
        &SkipList::empty(),
        session.block_len,
        session.filler_seed,
    )?)
}

/// Extracts the embedded channel, scans for sync words, validates CRCs, and
/// returns the payloads in order. Corrupt candidates are skipped and counted.
pub fn decode_stream(
    stream: &BitSequence,
    session: &ChannelSession,
) -> Result<(Vec<BitSequence>, DecodeDiagnostics), ChannelError> {
    let capacity =
        embed::capacity(stream.len(), &session.keying, &SkipList::empty(), session.block_len)?;
    let d = embed::extract_message(
        stream,
        &session.keying,
        &SkipList::empty(),
        session.block_len,
        capacity,
    )?;

    let mut payloads = Vec::new();
    let mut diag = DecodeDiagnostics::default();
    let mut window = 0u32;
    let mut filled = 0usize;
    let mut i = 0usize;
    let read_u32 = |d: &BitSequence, pos: usize| -> u32 {
        (0..32).fold(0u32, |acc, j| (acc << 1) | d.get(pos + j) as u32)
    };
    while i < d.len() {
        window = (window << 1) | d.get(i) as u32;
        filled += 1;
        i += 1;
        if filled < 32 || window != SYNC_WORD {
            continue;
        }
        // candidate frame begins right after the sync word
        if i + 32 > d.len() {
            break;
        }
        let length = read_u32(&d, i) as usize;
        if i + 32 + length + 32 > d.len() {
            diag.length_overflows += 1;
            continue;
        }
        let payload = BitSequence::from_bits(
            (0..length).map(|j| u8::from(d.get(i + 32 + j))),
        );
        let crc = read_u32(&d, i + 32 + length);
        if crc == frame_crc(length as u32, &payload) {
            payloads.push(payload);
            diag.frames_decoded += 1;
            i += 32 + length + 32;
            window = 0;
            filled = 0;
        } else {
            // rescan from the bit after this sync candidate
            diag.crc_failures += 1;
        }
    }
    Ok((payloads, diag))
}

/// What an eavesdropper can do: run the certification suite on the stream.
pub fn eavesdrop_check(
    stream: &BitSequence,
    config: &SuiteConfig,
) -> Result<SuiteReport, ChannelError> {
    let part = stream.partition(config.block_len);
    Ok(nist::run_suite(&part.blocks, config)?)
}
