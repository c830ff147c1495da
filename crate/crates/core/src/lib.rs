//! randembed: embed and extract information in certified-random bit streams
//! via parity schemes, certify sequences with an SP 800-22 battery under
//! 3-sigma proportion and uniformity pass rules, repair failing sequences,
//! score randomness strength by the minimal embeddable segment length, and
//! run a covert stream codec on top of the embedded channel.

pub mod analyze;
pub mod bitio;
pub mod channel;
pub mod cli;
pub mod embed;
pub mod nist;
pub mod rbg;

pub use bitio::{BitSequence, BlockView, Partition};
pub use embed::{EmbedKey, KeySchedule, Keying, SegmentGeometry, SkipList};
pub use nist::{SuiteConfig, SuiteReport, TestId, Verdict};
