use std::collections::{BTreeMap, HashMap};

use super::{DistributionProvider, PromptContext, ProviderError, ScoreVector, Vocabulary};
use crate::scalar::Scalar;
use crate::TokenId;

/// Conditions a prompt-agnostic provider on the context sentences.
///
/// Desk-scale stand-in for an instruction-following model reading the QA
/// prompt: the base distribution is mixed with a maximum-likelihood bigram
/// estimated from the context sentences alone,
/// `P(w | h, C) = λ·P_ctx(w | h) + (1 − λ)·P_base(w | h)`.
/// `P_ctx` backs off to the context unigram when the previous token never
/// occurs as a history in the context. Context words unknown to the base
/// vocabulary are skipped.
#[derive(Debug, Clone)]
pub struct InContextModel<P> {
    base: P,
    weight: f64,
}

#[derive(Default)]
struct ContextCounts {
    bigram: HashMap<TokenId, BTreeMap<TokenId, u64>>,
    unigram: BTreeMap<TokenId, u64>,
    total: u64,
}

impl<P> InContextModel<P> {
    pub const DEFAULT_WEIGHT: f64 = 0.5;

    pub fn new(base: P) -> Self {
        Self::with_weight(base, Self::DEFAULT_WEIGHT)
    }

    pub fn with_weight(base: P, weight: f64) -> Self {
        assert!((0.0..1.0).contains(&weight), "context weight must be in [0, 1)");
        Self { base, weight }
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl<P> InContextModel<P> {
    fn context_counts<F: Scalar>(&self, context: &PromptContext) -> ContextCounts
    where
        P: DistributionProvider<F>,
    {
        let eos = self.base.eos_token();
        let mut counts = ContextCounts::default();
        for sentence in &context.sentences {
            let mut prev = Vocabulary::BOS;
            let tokens = sentence
                .split_whitespace()
                .filter_map(|w| match self.base.tokenize(w) {
                    Ok(t) if t.len() == 1 => Some(t[0]),
                    _ => None,
                })
                .chain(std::iter::once(eos));
            for t in tokens {
                *counts.bigram.entry(prev).or_default().entry(t).or_insert(0) += 1;
                *counts.unigram.entry(t).or_insert(0) += 1;
                counts.total += 1;
                prev = t;
            }
        }
        counts
    }
}

impl<F: Scalar, P: DistributionProvider<F>> DistributionProvider<F> for InContextModel<P> {
    fn vocab_size(&self) -> usize {
        self.base.vocab_size()
    }

    fn eos_token(&self) -> TokenId {
        self.base.eos_token()
    }

    fn next_scores(
        &self,
        context: &PromptContext,
        prefix: &[TokenId],
    ) -> Result<ScoreVector<F>, ProviderError> {
        let base = self.base.next_scores(context, prefix)?;
        let counts = self.context_counts::<F>(context);
        if counts.total == 0 {
            return Ok(base);
        }
        let prev = prefix.last().copied().unwrap_or(Vocabulary::BOS);
        let (row, row_total): (&BTreeMap<TokenId, u64>, u64) = match counts.bigram.get(&prev) {
            Some(row) => (row, row.values().sum()),
            None => (&counts.unigram, counts.total),
        };

        let lambda = F::lit(self.weight);
        let keep = F::one() - lambda;
        let row_total = F::lit(row_total as f64);
        let mut mixed: Vec<(TokenId, F)> = base
            .softmax()
            .into_iter()
            .map(|(t, p)| {
                let c = row.get(&t).copied().unwrap_or(0);
                (t, keep * p + lambda * F::lit(c as f64) / row_total)
            })
            .collect();
        for (&t, &c) in row {
            if base.get(t).is_none() {
                mixed.push((t, lambda * F::lit(c as f64) / row_total));
            }
        }
        Ok(ScoreVector::from_sparse(
            mixed.into_iter().map(|(t, p)| (t, p.ln())).collect(),
        ))
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, ProviderError> {
        self.base.tokenize(text)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ProviderError> {
        self.base.detokenize(tokens)
    }
}
