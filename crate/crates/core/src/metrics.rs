//! Embedding rate (bits per word), perplexity and Jensen–Shannon divergence.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::provider::{DistributionProvider, PromptContext, ProviderError};
use crate::scalar::Scalar;
use crate::stega::StegoEnvelope;
use crate::TokenId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no input to evaluate")]
    EmptyInput,
    #[error("input contains no words")]
    NoWords,
    #[error("token {token} at position {position} has zero probability")]
    ZeroProbabilityToken { position: usize, token: TokenId },
    #[error("distributions have different supports ({left} vs {right} entries)")]
    SupportMismatch { left: usize, right: usize },
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpwReport {
    pub total_bits: usize,
    pub total_words: usize,
    pub bpw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JsdReport<F = f64> {
    pub jsd: F,
    pub sample_count: usize,
    /// Token positions averaged over.
    pub positions: usize,
    pub log_base: u32,
}

/// Whitespace-separated words with leading and trailing punctuation
/// stripped; pieces that are pure punctuation do not count.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace()
        .map(|w| w.trim_matches(is_punctuation))
        .filter(|w| !w.is_empty())
        .count()
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
                | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00A1}'
        )
}

pub fn bpw<C>(envelopes: &[StegoEnvelope], word_counter: C) -> Result<BpwReport, MetricsError>
where
    C: Fn(&str) -> usize,
{
    bpw_from_counts(
        envelopes
            .iter()
            .map(|e| (e.bits_consumed, word_counter(&e.text))),
    )
}

/// Aggregates `(bits, words)` pairs.
pub fn bpw_from_counts<I>(items: I) -> Result<BpwReport, MetricsError>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    let mut any = false;
    let (mut total_bits, mut total_words) = (0usize, 0usize);
    for (bits, words) in items {
        any = true;
        total_bits += bits;
        total_words += words;
    }
    if !any {
        return Err(MetricsError::EmptyInput);
    }
    if total_words == 0 {
        return Err(MetricsError::NoWords);
    }
    Ok(BpwReport {
        total_bits,
        total_words,
        bpw: total_bits as f64 / total_words as f64,
    })
}

/// `2^(−(1/n) Σ log2 P(x_i | x_<i))` under `provider`.
pub fn perplexity<F, P>(
    tokens: &[TokenId],
    provider: &P,
    context: &PromptContext,
) -> Result<F, MetricsError>
where
    F: Scalar,
    P: DistributionProvider<F> + ?Sized,
{
    if tokens.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut log_sum = F::zero();
    for (i, &token) in tokens.iter().enumerate() {
        let probs = provider.next_scores(context, &tokens[..i])?.softmax();
        let p = probs
            .iter()
            .find(|(t, _)| *t == token)
            .map(|(_, p)| *p)
            .filter(|p| *p > F::zero())
            .ok_or(MetricsError::ZeroProbabilityToken { position: i, token })?;
        log_sum = log_sum + p.log2();
    }
    let n = F::lit(tokens.len() as f64);
    Ok(F::lit(2.0).powf(-log_sum / n))
}

fn check_distribution<F: Scalar>(p: &[F]) -> Result<(), MetricsError> {
    if p.iter().any(|x| !x.is_finite() || *x < F::zero()) {
        return Err(MetricsError::NotADistribution("negative or non-finite entry".into()));
    }
    let sum = p.iter().fold(F::zero(), |a, &x| a + x);
    if (sum - F::one()).abs() > F::lit(1e-9).max(F::epsilon() * F::lit(p.len() as f64)) {
        return Err(MetricsError::NotADistribution(format!("sums to {sum}")));
    }
    Ok(())
}

/// `Σ p log2(p / m)` over entries with `p > 0`.
fn kl_to_mixture<F: Scalar>(p: &[F], m: &[F]) -> F {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > F::zero())
        .fold(F::zero(), |acc, (&pi, &mi)| acc + pi * (pi / mi).log2())
}

/// Jensen–Shannon divergence in bits: `½ KL(p‖m) + ½ KL(q‖m)`, `m = (p+q)/2`.
/// Always within `[0, 1]`.
pub fn jsd<F: Scalar>(p: &[F], q: &[F]) -> Result<F, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::SupportMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    Ok(jsd_unchecked(p, q))
}

fn jsd_unchecked<F: Scalar>(p: &[F], q: &[F]) -> F {
    let half = F::lit(0.5);
    let m: Vec<F> = p.iter().zip(q).map(|(&a, &b)| (a + b) * half).collect();
    let value = half * kl_to_mixture(p, &m) + half * kl_to_mixture(q, &m);
    value.max(F::zero()).min(F::one())
}

/// Mean per-position JSD between the next-token distributions of two
/// providers over every prefix of every sample. Sparse supports are aligned
/// by token id, missing tokens counting as zero.
pub fn corpus_jsd<F, A, B>(
    provider_a: &A,
    provider_b: &B,
    context: &PromptContext,
    samples: &[Vec<TokenId>],
) -> Result<JsdReport<F>, MetricsError>
where
    F: Scalar,
    A: DistributionProvider<F> + ?Sized,
    B: DistributionProvider<F> + ?Sized,
{
    let mut per_position: Vec<F> = Vec::new();
    for sample in samples {
        for i in 0..sample.len() {
            let prefix = &sample[..i];
            let pa = provider_a.next_scores(context, prefix)?.softmax();
            let pb = provider_b.next_scores(context, prefix)?.softmax();
            let mut aligned: BTreeMap<TokenId, (F, F)> = BTreeMap::new();
            for (t, p) in pa {
                aligned.entry(t).or_insert((F::zero(), F::zero())).0 = p;
            }
            for (t, p) in pb {
                aligned.entry(t).or_insert((F::zero(), F::zero())).1 = p;
            }
            let (p, q): (Vec<F>, Vec<F>) = aligned.into_values().unzip();
            per_position.push(jsd_unchecked(&p, &q));
        }
    }
    if per_position.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let sum = per_position.iter().fold(F::zero(), |a, &x| a + x);
    Ok(JsdReport {
        jsd: sum / F::lit(per_position.len() as f64),
        sample_count: samples.len(),
        positions: per_position.len(),
        log_base: 2,
    })
}
