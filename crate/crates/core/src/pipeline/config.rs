//! Flat `key=value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::PipelineError;
use crate::codec::{CodecId, MAX_EF_ROUNDS};
use crate::provider::{InContextModel, NgramModel};
use crate::stega::{digest_pairs, EmbedConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Toy,
    Remote,
}

impl FromStr for ProviderKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toy" => Ok(Self::Toy),
            "remote" => Ok(Self::Remote),
            other => Err(PipelineError::Config(format!(
                "provider must be toy or remote, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Toy => "toy",
            Self::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub embed: EmbedConfig<f64>,
    /// Prepared corpus directory or sentence-per-line file.
    pub corpus: Option<PathBuf>,
    /// Corpus name shown to the model.
    pub corpus_id: String,
    pub provider: ProviderKind,
    pub codec: CodecId,
    pub max_ef_rounds: u8,
    pub ngram_order: usize,
    pub smoothing: f64,
    pub context_weight: f64,
    /// Entries requested from a remote provider per step.
    pub top_k: usize,
    /// Word-per-line token table for a remote provider, line `i` is token `i`.
    pub vocabulary: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            embed: EmbedConfig::default(),
            corpus: None,
            corpus_id: "corpus".into(),
            provider: ProviderKind::Toy,
            codec: CodecId::Huffman,
            max_ef_rounds: MAX_EF_ROUNDS,
            ngram_order: NgramModel::DEFAULT_ORDER,
            smoothing: NgramModel::DEFAULT_SMOOTHING,
            context_weight: InContextModel::<()>::DEFAULT_WEIGHT,
            top_k: 64,
            vocabulary: None,
            output: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value
        .parse()
        .map_err(|_| PipelineError::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "alpha",
        "beta",
        "codec",
        "context_weight",
        "corpus",
        "corpus_id",
        "delta0",
        "ef_rounds",
        "k",
        "max_candidates",
        "max_tokens",
        "ngram_order",
        "output",
        "provider",
        "seed",
        "smoothing",
        "t0",
        "tau",
        "top_k",
        "vocabulary",
    ];

    /// Applies one `key=value` setting. Hyphens in keys are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "tau" => self.embed.tau = parse(&key, value)?,
            "t0" => self.embed.t0 = parse(&key, value)?,
            "alpha" => self.embed.alpha = parse(&key, value)?,
            "delta0" => self.embed.delta0 = parse(&key, value)?,
            "beta" => self.embed.beta = parse(&key, value)?,
            "k" | "context_size" => self.embed.context_size = parse(&key, value)?,
            "max_candidates" => self.embed.max_candidates = parse(&key, value)?,
            "max_tokens" => self.embed.max_tokens = parse(&key, value)?,
            "seed" => self.embed.seed = parse(&key, value)?,
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "corpus_id" => self.corpus_id = value.to_string(),
            "provider" => self.provider = value.parse()?,
            "codec" => {
                self.codec = match value {
                    "raw" | "0" => CodecId::Raw,
                    "huffman" | "1" => CodecId::Huffman,
                    other => {
                        return Err(PipelineError::Config(format!(
                            "codec must be raw or huffman, got {other:?}"
                        )))
                    }
                }
            }
            "ef_rounds" => self.max_ef_rounds = parse(&key, value)?,
            "ngram_order" => self.ngram_order = parse(&key, value)?,
            "smoothing" => self.smoothing = parse(&key, value)?,
            "context_weight" => self.context_weight = parse(&key, value)?,
            "top_k" => self.top_k = parse(&key, value)?,
            "vocabulary" => self.vocabulary = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(PipelineError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses a config file: `key=value` lines, `#` comments, blank lines.
    pub fn parse_str(text: &str) -> Result<Self, PipelineError> {
        let mut config = Self::default();
        config.apply_str(text)?;
        Ok(config)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected key=value", i + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.embed.validate()?;
        if self.max_ef_rounds > MAX_EF_ROUNDS {
            return Err(PipelineError::Config(format!(
                "ef_rounds must be at most {MAX_EF_ROUNDS}"
            )));
        }
        if self.ngram_order == 0 {
            return Err(PipelineError::Config("ngram_order must be at least 1".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(PipelineError::Config("smoothing must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.context_weight) {
            return Err(PipelineError::Config("context_weight must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Every key with its value, sorted by key. Unset paths are omitted.
    pub fn to_pairs(&self) -> BTreeMap<&'static str, String> {
        let mut pairs = self.embed.canonical_pairs();
        pairs.insert("corpus_id", self.corpus_id.clone());
        pairs.insert("provider", self.provider.to_string());
        pairs.insert(
            "codec",
            match self.codec {
                CodecId::Raw => "raw",
                CodecId::Huffman => "huffman",
            }
            .into(),
        );
        pairs.insert("ef_rounds", self.max_ef_rounds.to_string());
        pairs.insert("ngram_order", self.ngram_order.to_string());
        pairs.insert("smoothing", self.smoothing.to_string());
        pairs.insert("context_weight", self.context_weight.to_string());
        pairs.insert("top_k", self.top_k.to_string());
        if let Some(c) = &self.corpus {
            pairs.insert("corpus", c.display().to_string());
        }
        if let Some(v) = &self.vocabulary {
            pairs.insert("vocabulary", v.display().to_string());
        }
        if let Some(o) = &self.output {
            pairs.insert("output", o.display().to_string());
        }
        pairs
    }

    /// Sorted `key=value` lines; [`RunConfig::parse_str`] reads it back.
    pub fn render(&self) -> String {
        self.to_pairs()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 over the sorted `key=value` lines.
    pub fn digest(&self) -> String {
        digest_pairs(self.to_pairs().iter().map(|(k, v)| (*k, v.as_str())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let mut c = RunConfig::default();
        c.set("tau", "0.01").unwrap();
        c.set("max-tokens", "32").unwrap();
        c.set("codec", "raw").unwrap();
        c.set("corpus", "data/imdb").unwrap();
        let back = RunConfig::parse_str(&c.render()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn digest_ignores_line_order() {
        let a = RunConfig::parse_str("seed=5\ntau=0.01\n# note\n\nprovider=toy").unwrap();
        let b = RunConfig::parse_str("provider=toy\ntau=0.01\nseed=5").unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = RunConfig::parse_str("provider=toy\ntau=0.01\nseed=6").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse_str("nonsense").is_err());
        assert!(RunConfig::parse_str("bogus=1").is_err());
        assert!(RunConfig::parse_str("tau=abc").is_err());
        assert!(RunConfig::parse_str("provider=gpu").is_err());
        let mut c = RunConfig::default();
        c.max_ef_rounds = 16;
        assert!(c.validate().is_err());
        assert_eq!(RunConfig::KEYS.len(), RunConfig::KEYS.iter().collect::<std::collections::BTreeSet<_>>().len());
    }
}
