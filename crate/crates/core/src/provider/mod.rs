//! Deterministic next-token distribution sources.
//!
//! Sender and receiver must see bit-identical score vectors for identical
//! `(prompt, prefix)` inputs; every implementation here is a pure function of
//! its construction inputs, and the remote client checks that property with a
//! probe before use.

mod context;
mod in_context;
mod ngram;
mod remote;
mod uniform;

use std::collections::HashMap;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::TokenId;

pub use context::{build_prompt, select_context, PromptContext, SplitMix64};
pub use in_context::InContextModel;
pub use ngram::NgramModel;
pub use remote::{RemoteProvider, RemoteSettings, ENV_ENDPOINT, ENV_TIMEOUT_MS, ENV_TOKEN};
pub use uniform::UniformProvider;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("server returned {returned} of {requested} requested top-k entries")]
    InsufficientTopK { requested: usize, returned: usize },
    #[error("nondeterminism detected: {0}")]
    Nondeterminism(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("corpus has {available} sentences, {requested} requested")]
    CorpusTooSmall { available: usize, requested: usize },
    #[error("context size must be at least 1")]
    EmptyContext,
    #[error("{0} is not supported by this provider")]
    Unsupported(&'static str),
}

/// Unnormalized log-scores for the next token, ascending by token id.
/// Tokens that are absent have probability zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<F> {
    entries: Vec<(TokenId, F)>,
}

impl<F: Scalar> ScoreVector<F> {
    /// Sorts by token id; duplicates keep the first occurrence.
    pub fn from_sparse(mut entries: Vec<(TokenId, F)>) -> Self {
        entries.sort_by_key(|(t, _)| *t);
        entries.dedup_by_key(|(t, _)| *t);
        Self { entries }
    }

    /// Scores for tokens `0..scores.len()`.
    pub fn from_dense(scores: Vec<F>) -> Self {
        Self {
            entries: scores
                .into_iter()
                .enumerate()
                .map(|(i, s)| (i as TokenId, s))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(TokenId, F)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: TokenId) -> Option<F> {
        self.entries
            .binary_search_by_key(&token, |(t, _)| *t)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn without(&self, token: TokenId) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|(t, _)| *t != token)
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, s)| s.is_finite())
    }

    /// Normalized probabilities, same order as the entries.
    pub fn softmax(&self) -> Vec<(TokenId, F)> {
        let max = self
            .entries
            .iter()
            .fold(F::neg_infinity(), |m, (_, s)| m.max(*s));
        let exps: Vec<F> = self.entries.iter().map(|(_, s)| (*s - max).exp()).collect();
        let sum = exps.iter().fold(F::zero(), |a, &e| a + e);
        self.entries
            .iter()
            .zip(exps)
            .map(|((t, _), e)| (*t, e / sum))
            .collect()
    }
}

/// A source of next-token score vectors.
pub trait DistributionProvider<F: Scalar> {
    fn vocab_size(&self) -> usize;

    fn eos_token(&self) -> TokenId;

    fn next_scores(
        &self,
        context: &PromptContext,
        prefix: &[TokenId],
    ) -> Result<ScoreVector<F>, ProviderError>;

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, ProviderError>;

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ProviderError>;

    /// Queries the same input twice and fails if the answers differ.
    fn probe_determinism(&self, context: &PromptContext) -> Result<(), ProviderError> {
        let first = self.next_scores(context, &[])?;
        let second = self.next_scores(context, &[])?;
        if first != second {
            return Err(ProviderError::Nondeterminism(format!(
                "two identical queries returned different score vectors ({} vs {} entries)",
                first.len(),
                second.len()
            )));
        }
        Ok(())
    }
}

impl<F: Scalar, P: DistributionProvider<F> + ?Sized> DistributionProvider<F> for &P {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn eos_token(&self) -> TokenId {
        (**self).eos_token()
    }
    fn next_scores(
        &self,
        context: &PromptContext,
        prefix: &[TokenId],
    ) -> Result<ScoreVector<F>, ProviderError> {
        (**self).next_scores(context, prefix)
    }
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, ProviderError> {
        (**self).tokenize(text)
    }
    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ProviderError> {
        (**self).detokenize(tokens)
    }
}

/// Word-level vocabulary: lowercase, whitespace-split.
///
/// Id 0 is the sentence-start marker, id 1 the end-of-sequence token, and
/// words follow in byte-lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub const BOS: TokenId = 0;
    pub const EOS: TokenId = 1;
    const BOS_TEXT: &'static str = "<s>";
    const EOS_TEXT: &'static str = "</s>";

    pub fn from_sentences<'a, I>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words: Vec<String> = sentences
            .into_iter()
            .flat_map(split_words)
            .filter(|w| w != Self::BOS_TEXT && w != Self::EOS_TEXT)
            .collect();
        words.sort_unstable();
        words.dedup();
        Self::from_words(words)
    }

    fn from_words(words: Vec<String>) -> Self {
        let mut all = vec![Self::BOS_TEXT.to_string(), Self::EOS_TEXT.to_string()];
        all.extend(words);
        let index = all
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as TokenId))
            .collect();
        Self { words: all, index }
    }

    /// Including the two markers.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 2
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>, ProviderError> {
        split_words(text)
            .map(|w| {
                self.id(&w).ok_or_else(|| {
                    ProviderError::VocabularyMismatch(format!("word {w:?} not in vocabulary"))
                })
            })
            .collect()
    }

    /// Words joined by single spaces; the markers render as nothing.
    pub fn decode(&self, tokens: &[TokenId]) -> Result<String, ProviderError> {
        let mut out: Vec<&str> = Vec::with_capacity(tokens.len());
        for &t in tokens {
            if t == Self::BOS || t == Self::EOS {
                continue;
            }
            out.push(self.word(t).ok_or_else(|| {
                ProviderError::VocabularyMismatch(format!("token id {t} out of range"))
            })?);
        }
        Ok(out.join(" "))
    }
}

fn split_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}
