//! The hide/extract engine.

mod adjust;
mod config;
mod engine;

use std::fmt::Write as _;

use thiserror::Error;

use crate::huffman::HuffmanError;
use crate::provider::ProviderError;
use crate::TokenId;

pub use adjust::{
    adjust_distribution, prune, step_penalties, step_temperature, EmbedState, TokenDistribution,
};
pub use config::EmbedConfig;
pub(crate) use config::digest_pairs;
pub use engine::{extract, extract_text, extract_traced, hide, hide_traced, StepRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StegaError {
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
    #[error("capacity exceeded: {embedded} of {payload} bits embedded within {max_tokens} tokens")]
    CapacityExceeded {
        max_tokens: usize,
        embedded: usize,
        payload: usize,
    },
    #[error("token {token} at step {step} is not among the {pool_size} reconstructed candidates (config, seed, corpus or provider mismatch)")]
    TokenNotInPool {
        step: usize,
        token: TokenId,
        pool_size: usize,
    },
    #[error("stegotext ended after {recovered} of {needed} payload bits")]
    TruncatedStegotext { recovered: usize, needed: usize },
    #[error("provider returned no candidates at step {step}")]
    EmptyDistribution { step: usize },
    #[error("provider returned non-finite scores at step {step}")]
    NonFiniteScores { step: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Huffman(#[from] HuffmanError),
    #[error("malformed envelope metadata: {0}")]
    BadMetadata(String),
}

/// Stegotext plus what the receiver needs to replay generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StegoEnvelope {
    pub text: String,
    pub tokens: Vec<TokenId>,
    /// Payload bits carried; zero-bit completion tokens not included.
    pub bits_consumed: usize,
    pub corpus_id: String,
    pub seed: u64,
    pub config_digest: String,
}

/// Pre-shared metadata for one envelope: `key=value` per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sidecar {
    pub corpus_id: String,
    pub seed: u64,
    pub config_digest: String,
    /// Position in a chain of envelopes carrying one secret.
    pub sequence: usize,
    pub count: usize,
}

impl Sidecar {
    pub fn for_envelope(envelope: &StegoEnvelope, sequence: usize, count: usize) -> Self {
        Self {
            corpus_id: envelope.corpus_id.clone(),
            seed: envelope.seed,
            config_digest: envelope.config_digest.clone(),
            sequence,
            count,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "corpus_id={}", self.corpus_id).unwrap();
        writeln!(out, "seed={}", self.seed).unwrap();
        writeln!(out, "config_digest={}", self.config_digest).unwrap();
        writeln!(out, "sequence={}", self.sequence).unwrap();
        writeln!(out, "count={}", self.count).unwrap();
        out
    }

    pub fn parse(text: &str) -> Result<Self, StegaError> {
        let bad = |m: String| StegaError::BadMetadata(m);
        let (mut corpus_id, mut seed, mut digest, mut sequence, mut count) = (None, None, None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let int = |v: &str| v.parse::<u64>().map_err(|_| bad(format!("{key}: {v:?} is not an integer")));
            match key {
                "corpus_id" => corpus_id = Some(value.to_string()),
                "seed" => seed = Some(int(value)?),
                "config_digest" => digest = Some(value.to_string()),
                "sequence" => sequence = Some(int(value)? as usize),
                "count" => count = Some(int(value)? as usize),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(Self {
            corpus_id: corpus_id.ok_or_else(|| bad("missing corpus_id".into()))?,
            seed: seed.ok_or_else(|| bad("missing seed".into()))?,
            config_digest: digest.ok_or_else(|| bad("missing config_digest".into()))?,
            sequence: sequence.unwrap_or(0),
            count: count.unwrap_or(1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_round_trip() {
        let s = Sidecar {
            corpus_id: "imdb".into(),
            seed: 18446744073709551615,
            config_digest: "ab".repeat(32),
            sequence: 2,
            count: 3,
        };
        assert_eq!(Sidecar::parse(&s.render()).unwrap(), s);
        assert!(s.render().starts_with("corpus_id=imdb\nseed=18446744073709551615\n"));
        let minimal = Sidecar::parse("corpus_id=x\nseed=1\nconfig_digest=ff\n").unwrap();
        assert_eq!((minimal.sequence, minimal.count), (0, 1));
        assert!(Sidecar::parse("seed=1\nconfig_digest=ff").is_err());
        assert!(Sidecar::parse("corpus_id=x\nseed=-1\nconfig_digest=ff").is_err());
        assert!(Sidecar::parse("corpus_id=x\nseed=1\nconfig_digest=ff\nbogus=1").is_err());
    }
}
