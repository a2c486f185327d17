//! Payload header: `magic(8) | version(4) | ef_rounds(4) | codec_id(8) | body_len(32) | body`.

use super::{CodecError, CodecId, MAX_EF_ROUNDS};
use crate::bits::BitStream;

pub const MAGIC: u8 = 0xA7;
pub const VERSION: u8 = 0x1;
pub const HEADER_BITS: usize = 56;

/// Offset of the 32-bit `body_len` field inside the header.
const BODY_LEN_OFFSET: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretPayload {
    pub version: u8,
    pub ef_rounds: u8,
    pub codec_id: CodecId,
    pub body: BitStream,
}

pub fn frame_payload(
    body: &BitStream,
    ef_rounds: u8,
    codec_id: CodecId,
) -> Result<BitStream, CodecError> {
    if ef_rounds > MAX_EF_ROUNDS {
        return Err(CodecError::TooManyRounds(ef_rounds));
    }
    let body_len = u32::try_from(body.len()).map_err(|_| CodecError::BodyTooLong(body.len()))?;
    let mut out = BitStream::with_capacity(HEADER_BITS + body.len());
    out.push_uint(u64::from(MAGIC), 8);
    out.push_uint(u64::from(VERSION), 4);
    out.push_uint(u64::from(ef_rounds), 4);
    out.push_uint(u64::from(codec_id as u8), 8);
    out.push_uint(u64::from(body_len), 32);
    out.extend_from(body);
    Ok(out)
}

/// Parses a framed stream. Bits after the declared body are ignored.
pub fn unframe_payload(bits: &BitStream) -> Result<SecretPayload, CodecError> {
    let truncated = |needed| CodecError::TruncatedPayload {
        needed,
        available: bits.len(),
    };
    let mut r = bits.reader();
    let magic = r.read_uint(8).ok_or(truncated(HEADER_BITS))? as u8;
    if magic != MAGIC {
        return Err(CodecError::BadMagic { found: magic });
    }
    let version = r.read_uint(4).ok_or(truncated(HEADER_BITS))? as u8;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let ef_rounds = r.read_uint(4).ok_or(truncated(HEADER_BITS))? as u8;
    let codec_raw = r.read_uint(8).ok_or(truncated(HEADER_BITS))? as u8;
    let codec_id = CodecId::try_from(codec_raw)?;
    let body_len = r.read_uint(32).ok_or(truncated(HEADER_BITS))? as usize;
    let body = r
        .read_bits(body_len)
        .ok_or(truncated(HEADER_BITS + body_len))?;
    Ok(SecretPayload {
        version,
        ef_rounds,
        codec_id,
        body,
    })
}

/// Total frame length (header plus body) announced by a header prefix, once
/// at least [`HEADER_BITS`] bits are available. Performs no validation.
pub fn declared_frame_len(prefix: &[bool]) -> Option<usize> {
    if prefix.len() < HEADER_BITS {
        return None;
    }
    let body_len = prefix[BODY_LEN_OFFSET..HEADER_BITS]
        .iter()
        .fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
    Some(HEADER_BITS + body_len)
}
