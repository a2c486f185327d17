use std::collections::HashMap;

use super::{DistributionProvider, PromptContext, ProviderError, ScoreVector, Vocabulary};
use crate::scalar::Scalar;
use crate::TokenId;

#[derive(Debug, Clone, Default)]
struct Row {
    total: u64,
    next: HashMap<TokenId, u64>,
}

/// Interpolated add-k n-gram model over a word vocabulary.
///
/// `P(w | h) = Σ_j λ_j · (c(h_j, w) + k) / (c(h_j) + k·V)` where `h_j` is the
/// last `j` tokens of the history (`j = 0..order`), `V` counts every
/// predictable token (words plus end-of-sequence) and `λ_j ∝ 2^j`. Every
/// component is a proper distribution, so rows sum to one and every
/// probability is positive. Histories are left-padded with the start marker.
///
/// The prompt is ignored; see [`super::InContextModel`] for conditioning on it.
#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    smoothing: f64,
    vocab: Vocabulary,
    tables: Vec<HashMap<Vec<TokenId>, Row>>,
    weights: Vec<f64>,
}

impl NgramModel {
    pub const DEFAULT_ORDER: usize = 2;
    pub const DEFAULT_SMOOTHING: f64 = 1.0;

    /// Trains a bigram model with add-one smoothing.
    pub fn train<'a, I>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a str> + Clone,
    {
        Self::train_with(sentences, Self::DEFAULT_ORDER, Self::DEFAULT_SMOOTHING)
    }

    pub fn train_with<'a, I>(sentences: I, order: usize, smoothing: f64) -> Self
    where
        I: IntoIterator<Item = &'a str> + Clone,
    {
        let vocab = Vocabulary::from_sentences(sentences.clone());
        Self::train_with_vocab(sentences, vocab, order, smoothing)
            .expect("vocabulary built from the same sentences")
    }

    /// Trains over a fixed vocabulary; every training word must be in it.
    pub fn train_with_vocab<'a, I>(
        sentences: I,
        vocab: Vocabulary,
        order: usize,
        smoothing: f64,
    ) -> Result<Self, ProviderError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        assert!(order >= 1, "n-gram order must be at least 1");
        assert!(smoothing > 0.0, "smoothing constant must be positive");
        let mut tables: Vec<HashMap<Vec<TokenId>, Row>> = vec![HashMap::new(); order];
        for sentence in sentences {
            let mut tokens = vec![Vocabulary::BOS; order - 1];
            tokens.extend(vocab.encode(sentence)?);
            tokens.push(Vocabulary::EOS);
            for pos in (order - 1)..tokens.len() {
                let target = tokens[pos];
                for (j, table) in tables.iter_mut().enumerate() {
                    let row = table.entry(tokens[pos - j..pos].to_vec()).or_default();
                    row.total += 1;
                    *row.next.entry(target).or_insert(0) += 1;
                }
            }
        }
        let raw: Vec<f64> = (0..order).map(|j| (1u64 << j) as f64).collect();
        let norm: f64 = raw.iter().sum();
        Ok(Self {
            order,
            smoothing,
            vocab,
            tables,
            weights: raw.into_iter().map(|w| w / norm).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Number of tokens that can be predicted (everything but the start marker).
    pub fn predictable(&self) -> usize {
        self.vocab.len() - 1
    }

    /// Conditional probabilities for tokens `1..vocab.len()`, index `i`
    /// holding token `i + 1`.
    pub fn probabilities<F: Scalar>(&self, prefix: &[TokenId]) -> Vec<F> {
        let v = self.predictable();
        let k = F::lit(self.smoothing);
        let mut history = vec![Vocabulary::BOS; self.order - 1];
        history.extend_from_slice(prefix);
        let history = &history[history.len() - (self.order - 1)..];

        let mut probs = vec![F::zero(); v];
        let mut floor = F::zero();
        for (j, table) in self.tables.iter().enumerate() {
            let lambda = F::lit(self.weights[j]);
            let row = table.get(&history[history.len() - j..]);
            let total = F::lit(row.map_or(0, |r| r.total) as f64);
            let denom = total + k * F::lit(v as f64);
            floor = floor + lambda * k / denom;
            if let Some(row) = row {
                for (&t, &c) in &row.next {
                    let idx = t as usize - 1;
                    probs[idx] = probs[idx] + lambda * F::lit(c as f64) / denom;
                }
            }
        }
        for p in probs.iter_mut() {
            *p = *p + floor;
        }
        probs
    }
}

impl<F: Scalar> DistributionProvider<F> for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn eos_token(&self) -> TokenId {
        Vocabulary::EOS
    }

    fn next_scores(
        &self,
        _context: &PromptContext,
        prefix: &[TokenId],
    ) -> Result<ScoreVector<F>, ProviderError> {
        if let Some(&bad) = prefix.iter().find(|&&t| t as usize >= self.vocab.len()) {
            return Err(ProviderError::VocabularyMismatch(format!(
                "prefix token {bad} outside vocabulary of {}",
                self.vocab.len()
            )));
        }
        let probs = self.probabilities::<F>(prefix);
        Ok(ScoreVector::from_sparse(
            probs
                .into_iter()
                .enumerate()
                .map(|(i, p)| ((i + 1) as TokenId, p.ln()))
                .collect(),
        ))
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, ProviderError> {
        self.vocab.encode(text)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ProviderError> {
        self.vocab.decode(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abab() -> NgramModel {
        NgramModel::train(["a b a b"])
    }

    #[test]
    fn bigram_prefers_b_after_a() {
        let m = abab();
        let a = m.vocabulary().id("a").unwrap();
        let b = m.vocabulary().id("b").unwrap();
        let ctx = PromptContext::empty();
        let scores: ScoreVector<f64> = m.next_scores(&ctx, &[a]).unwrap();
        let best = scores
            .entries()
            .iter()
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        assert_eq!(best.0, b);
        // V = {</s>, a, b}; unigram counts a:2 b:2 </s>:1 over 5; a->b twice.
        // P(b|a) = 1/3 * (2+1)/(5+3) + 2/3 * (2+1)/(2+3) = 0.525
        assert!((scores.get(b).unwrap().exp() - 0.525).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one() {
        let m = NgramModel::train(["the cat sat", "the dog sat down", "a cat ran"]);
        let ctx = PromptContext::empty();
        for prefix in [vec![], vec![2], vec![3, 4], vec![1, 1, 1]] {
            let p = m.probabilities::<f64>(&prefix);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "{sum}");
            assert!(p.iter().all(|&x| x > 0.0));
            let s: ScoreVector<f64> = m.next_scores(&ctx, &prefix).unwrap();
            assert_eq!(s.len(), m.vocabulary().len() - 1);
        }
    }

    #[test]
    fn deterministic_and_validates_prefix() {
        let m = abab();
        let ctx = PromptContext::empty();
        let x: ScoreVector<f32> = m.next_scores(&ctx, &[]).unwrap();
        let y: ScoreVector<f32> = m.next_scores(&ctx, &[]).unwrap();
        assert_eq!(x, y);
        let bad: Result<ScoreVector<f64>, _> = m.next_scores(&ctx, &[42]);
        assert!(matches!(bad, Err(ProviderError::VocabularyMismatch(_))));
    }

    #[test]
    fn trigram_order() {
        let m = NgramModel::train_with(["x y z", "x y w"], 3, 0.5);
        let p = m.probabilities::<f64>(&[]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.order(), 3);
    }
}
