use super::{DistributionProvider, PromptContext, ProviderError, ScoreVector};
use crate::scalar::Scalar;
use crate::TokenId;

/// Equal score for every token in `0..vocab_size`. Tokens render as their
/// decimal id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformProvider {
    vocab_size: usize,
    eos: TokenId,
}

impl UniformProvider {
    pub fn new(vocab_size: usize, eos: TokenId) -> Self {
        assert!(vocab_size > 0);
        Self { vocab_size, eos }
    }
}

impl<F: Scalar> DistributionProvider<F> for UniformProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn eos_token(&self) -> TokenId {
        self.eos
    }

    fn next_scores(
        &self,
        _context: &PromptContext,
        _prefix: &[TokenId],
    ) -> Result<ScoreVector<F>, ProviderError> {
        Ok(ScoreVector::from_dense(vec![F::zero(); self.vocab_size]))
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, ProviderError> {
        text.split_whitespace()
            .map(|w| match w.parse::<TokenId>() {
                Ok(t) if (t as usize) < self.vocab_size => Ok(t),
                _ => Err(ProviderError::VocabularyMismatch(format!("{w:?} is not a token id"))),
            })
            .collect()
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ProviderError> {
        Ok(tokens
            .iter()
            .filter(|&&t| t != self.eos)
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(" "))
    }
}
