//! Byte-level text codecs: raw UTF-8, or a static canonical Huffman code built
//! from a corpus byte-frequency table.

use std::fmt;
use std::io::{BufRead, Write};

use super::CodecError;
use crate::bits::BitStream;
use crate::huffman::{build_codebook, CandidatePool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CodecId {
    Raw = 0,
    Huffman = 1,
}

impl TryFrom<u8> for CodecId {
    type Error = CodecError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(CodecId::Raw),
            1 => Ok(CodecId::Huffman),
            other => Err(CodecError::UnknownCodec(other)),
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// Byte counts with add-one smoothing, so every byte value is encodable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: [u64; 256],
}

impl Default for FrequencyTable {
    fn default() -> Self {
        Self { counts: [1; 256] }
    }
}

impl FrequencyTable {
    /// Flat table: every byte counted once.
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn from_corpus(bytes: &[u8]) -> Self {
        let mut table = Self::default();
        for &b in bytes {
            table.counts[b as usize] += 1;
        }
        table
    }

    /// Builds a table from explicit counts; zero counts are lifted to 1.
    pub fn from_counts(counts: [u64; 256]) -> Self {
        let mut counts = counts;
        for c in counts.iter_mut() {
            *c = (*c).max(1);
        }
        Self { counts }
    }

    pub fn count(&self, byte: u8) -> u64 {
        self.counts[byte as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `<byte>\t<count>` lines, ascending byte value.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (byte, count) in self.counts.iter().enumerate() {
            writeln!(out, "{byte}\t{count}")?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }

    /// Parses the TSV form. Missing byte values are smoothed to 1; counts of
    /// zero are rejected.
    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self, CodecError> {
        let mut counts = [0u64; 256];
        let mut seen = [false; 256];
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let bad = |reason: String| CodecError::BadFrequencyTable {
                line: line_no,
                reason,
            };
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let (byte, count) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected <byte>\\t<count>".into()))?;
            let byte: u8 = byte
                .parse()
                .map_err(|_| bad(format!("invalid byte value {byte:?}")))?;
            let count: u64 = count
                .parse()
                .map_err(|_| bad(format!("invalid count {count:?}")))?;
            if count == 0 {
                return Err(bad(format!("count for byte {byte} must be at least 1")));
            }
            if std::mem::replace(&mut seen[byte as usize], true) {
                return Err(bad(format!("byte {byte} listed twice")));
            }
            counts[byte as usize] = count;
        }
        Ok(Self::from_counts(counts))
    }

    pub fn parse_tsv(text: &str) -> Result<Self, CodecError> {
        Self::read_tsv(text.as_bytes())
    }
}

#[derive(Debug, Default)]
struct Trie {
    // children[node] = [zero, one]; leaf nodes hold a byte.
    children: Vec<[u32; 2]>,
    symbol: Vec<Option<u8>>,
}

impl Trie {
    const NONE: u32 = u32::MAX;

    fn new() -> Self {
        Self {
            children: vec![[Self::NONE; 2]],
            symbol: vec![None],
        }
    }

    fn insert(&mut self, code: &BitStream, byte: u8) {
        let mut node = 0usize;
        for bit in code.iter() {
            let slot = self.children[node][bit as usize];
            node = if slot == Self::NONE {
                self.children.push([Self::NONE; 2]);
                self.symbol.push(None);
                let idx = self.children.len() - 1;
                self.children[node][bit as usize] = idx as u32;
                idx
            } else {
                slot as usize
            };
        }
        self.symbol[node] = Some(byte);
    }
}

/// Encoder/decoder for one `(table, codec)` pair.
#[derive(Debug)]
pub struct TextCodec {
    codec: CodecId,
    codes: Vec<BitStream>,
    trie: Trie,
}

impl TextCodec {
    pub fn new(table: &FrequencyTable, codec: CodecId) -> Self {
        match codec {
            CodecId::Raw => Self {
                codec,
                codes: Vec::new(),
                trie: Trie::new(),
            },
            CodecId::Huffman => {
                let codes = canonical_codes(table);
                let mut trie = Trie::new();
                for (byte, code) in codes.iter().enumerate() {
                    trie.insert(code, byte as u8);
                }
                Self { codec, codes, trie }
            }
        }
    }

    pub fn codec(&self) -> CodecId {
        self.codec
    }

    /// Canonical code of a byte (Huffman codec only).
    pub fn code_of(&self, byte: u8) -> Option<&BitStream> {
        self.codes.get(byte as usize)
    }

    pub fn compress(&self, text: &str) -> BitStream {
        match self.codec {
            CodecId::Raw => BitStream::from_byte_slice(text.as_bytes()),
            CodecId::Huffman => {
                let mut out = BitStream::new();
                for &b in text.as_bytes() {
                    out.extend_from(&self.codes[b as usize]);
                }
                out
            }
        }
    }

    pub fn decompress(&self, bits: &BitStream) -> Result<String, CodecError> {
        let bytes = match self.codec {
            CodecId::Raw => {
                if bits.len() % 8 != 0 {
                    return Err(CodecError::MalformedBitstream(format!(
                        "{} bits is not a whole number of bytes",
                        bits.len()
                    )));
                }
                bits.to_bytes()
            }
            CodecId::Huffman => {
                let mut bytes = Vec::new();
                let mut node = 0usize;
                for (pos, bit) in bits.iter().enumerate() {
                    let next = self.trie.children[node][bit as usize];
                    if next == Trie::NONE {
                        return Err(CodecError::MalformedBitstream(format!(
                            "no codeword continues at bit {pos}"
                        )));
                    }
                    node = next as usize;
                    if let Some(byte) = self.trie.symbol[node] {
                        bytes.push(byte);
                        node = 0;
                    }
                }
                if node != 0 {
                    return Err(CodecError::MalformedBitstream(
                        "stream ends inside a codeword".into(),
                    ));
                }
                bytes
            }
        };
        String::from_utf8(bytes).map_err(|_| CodecError::InvalidUtf8)
    }
}

/// Huffman code lengths from the table (ties by ascending byte value), then
/// canonical assignment ordered by `(length, byte)`.
fn canonical_codes(table: &FrequencyTable) -> Vec<BitStream> {
    let pool = CandidatePool::new(
        (0..=255u8)
            .map(|b| (u32::from(b), table.count(b)))
            .collect(),
    )
    .expect("smoothed table has 256 positive counts");
    let book = build_codebook(&pool);
    let mut lengths: Vec<(usize, u8)> = (0..=255u8)
        .map(|b| (book.code_of(u32::from(b)).expect("every byte coded").len(), b))
        .collect();
    lengths.sort_unstable();

    let mut codes = vec![BitStream::new(); 256];
    let mut code = BitStream::new();
    for (i, &(len, byte)) in lengths.iter().enumerate() {
        if i > 0 {
            increment(&mut code);
        }
        while code.len() < len {
            code.push(false);
        }
        codes[byte as usize] = code.clone();
    }
    codes
}

/// Adds one to a big-endian bit string in place.
fn increment(code: &mut BitStream) {
    let mut bits = code.as_slice().to_vec();
    for bit in bits.iter_mut().rev() {
        if *bit {
            *bit = false;
        } else {
            *bit = true;
            break;
        }
    }
    *code = BitStream::from_bits(bits);
}

pub fn compress_text(text: &str, table: &FrequencyTable, codec: CodecId) -> BitStream {
    TextCodec::new(table, codec).compress(text)
}

pub fn decompress_text(
    bits: &BitStream,
    table: &FrequencyTable,
    codec: CodecId,
) -> Result<String, CodecError> {
    TextCodec::new(table, codec).decompress(bits)
}
