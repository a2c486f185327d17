//! Secret text to framed bitstream and back.
//!
//! `text -> compress -> multi-round EF -> frame` on the way in, the reverse on
//! the way out. The frame header is never EF-coded so the receiver can read the
//! round count before undoing the rounds.

mod ef;
mod frame;
mod text;

use thiserror::Error;

pub use ef::{ef_decode, ef_decode_rounds, ef_encode, ef_multiround, MAX_EF_ROUNDS};
pub use frame::{
    declared_frame_len, frame_payload, unframe_payload, SecretPayload, HEADER_BITS, MAGIC,
    VERSION,
};
pub use text::{compress_text, decompress_text, CodecId, FrequencyTable, TextCodec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("malformed bitstream: {0}")]
    MalformedBitstream(String),
    #[error("decoded bytes are not valid UTF-8")]
    InvalidUtf8,
    #[error("bad magic byte {found:#04x}")]
    BadMagic { found: u8 },
    #[error("unsupported payload version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown codec id {0}")]
    UnknownCodec(u8),
    #[error("truncated payload: need {needed} bits, have {available}")]
    TruncatedPayload { needed: usize, available: usize },
    #[error("edge-flip round count {0} does not fit the 4-bit header field")]
    TooManyRounds(u8),
    #[error("body of {0} bits does not fit the 32-bit length field")]
    BodyTooLong(usize),
    #[error("frequency table line {line}: {reason}")]
    BadFrequencyTable { line: usize, reason: String },
}
