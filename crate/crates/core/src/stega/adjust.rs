//! Per-step distribution adjustment: repeat penalty, annealing temperature
//! and threshold pruning.

use std::collections::BTreeMap;

use super::EmbedConfig;
use crate::huffman::{rank_order, CandidatePool};
use crate::provider::ScoreVector;
use crate::scalar::Scalar;
use crate::TokenId;

/// Running state of one hide or extract session.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedState<F = f64> {
    /// Temperature for the upcoming step.
    pub temperature: F,
    /// Penalties for the upcoming step; absent tokens carry zero.
    pub penalties: BTreeMap<TokenId, F>,
    /// Size of the previous step's candidate pool.
    pub prev_pool_size: Option<usize>,
    pub generated: Vec<TokenId>,
    pub bits_consumed: usize,
}

impl<F: Scalar> EmbedState<F> {
    pub fn new(config: &EmbedConfig<F>) -> Self {
        Self {
            temperature: config.t0,
            penalties: BTreeMap::new(),
            prev_pool_size: None,
            generated: Vec::new(),
            bits_consumed: 0,
        }
    }

    pub fn penalty(&self, token: TokenId) -> F {
        self.penalties.get(&token).copied().unwrap_or_else(F::zero)
    }

    /// Applies the recurrences after `selected` was chosen from `pool`.
    pub fn advance(&mut self, config: &EmbedConfig<F>, pool: &CandidatePool<F>, selected: TokenId) {
        self.penalties = step_penalties(&self.penalties, config, pool, selected);
        self.prev_pool_size = Some(pool.len());
        self.temperature = step_temperature(self, config);
        self.generated.push(selected);
    }
}

/// Adjusted next-token distribution, descending probability with ties by
/// ascending token id.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution<F = f64> {
    entries: Vec<(TokenId, F)>,
}

impl<F: Scalar> TokenDistribution<F> {
    pub fn from_unsorted(mut entries: Vec<(TokenId, F)>) -> Self {
        entries.sort_by(rank_order);
        Self { entries }
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

    pub fn argmax(&self) -> Option<TokenId> {
        self.entries.first().map(|(t, _)| *t)
    }

    pub fn probability(&self, token: TokenId) -> Option<F> {
        self.entries.iter().find(|(t, _)| *t == token).map(|(_, p)| *p)
    }
}

/// `softmax((raw − δ) / T)` in provider (token id) order.
fn adjusted_probabilities<F: Scalar>(raw: &ScoreVector<F>, state: &EmbedState<F>) -> Vec<(TokenId, F)> {
    let mut logits: Vec<(TokenId, F)> = raw.entries().to_vec();
    for (&token, &delta) in &state.penalties {
        if let Ok(i) = logits.binary_search_by_key(&token, |(t, _)| *t) {
            logits[i].1 = logits[i].1 - delta;
        }
    }
    let t = state.temperature;
    for (_, z) in logits.iter_mut() {
        *z = *z / t;
    }
    ScoreVector::from_sparse(logits).softmax()
}

/// Penalty subtraction first, then temperature division, then softmax.
pub fn adjust_distribution<F: Scalar>(
    raw: &ScoreVector<F>,
    state: &EmbedState<F>,
    _config: &EmbedConfig<F>,
) -> TokenDistribution<F> {
    TokenDistribution::from_unsorted(adjusted_probabilities(raw, state))
}

/// Next temperature: `α·T` after a singleton pool, `T0` otherwise (including
/// before the first step).
pub fn step_temperature<F: Scalar>(state: &EmbedState<F>, config: &EmbedConfig<F>) -> F {
    match state.prev_pool_size {
        Some(1) => config.alpha * state.temperature,
        _ => config.t0,
    }
}

/// Next penalties: the selected token gets `δ0`, every other member of the
/// pool decays by `β` floored at zero, tokens outside the pool keep theirs.
/// Zero entries are dropped.
pub fn step_penalties<F: Scalar>(
    penalties: &BTreeMap<TokenId, F>,
    config: &EmbedConfig<F>,
    pool: &CandidatePool<F>,
    selected: TokenId,
) -> BTreeMap<TokenId, F> {
    let mut next = penalties.clone();
    for token in pool.tokens() {
        let value = if token == selected {
            config.delta0
        } else {
            let current = penalties.get(&token).copied().unwrap_or_else(F::zero);
            (current - config.beta).max(F::zero())
        };
        if value > F::zero() {
            next.insert(token, value);
        } else {
            next.remove(&token);
        }
    }
    next
}

/// Keeps tokens with probability ≥ τ, at most `max_candidates` of them, or
/// the single top token if none pass; then renormalizes.
pub fn prune<F: Scalar>(dist: &TokenDistribution<F>, config: &EmbedConfig<F>) -> CandidatePool<F> {
    let kept: Vec<(TokenId, F)> = dist
        .entries()
        .iter()
        .copied()
        .take_while(|(_, p)| *p >= config.tau)
        .collect();
    finish_pool(kept, dist.entries().first().copied(), config)
}

/// Same result as `prune(adjust_distribution(..))` without sorting the tail
/// below τ.
pub(crate) fn adjusted_pool<F: Scalar>(
    raw: &ScoreVector<F>,
    state: &EmbedState<F>,
    config: &EmbedConfig<F>,
) -> CandidatePool<F> {
    let probs = adjusted_probabilities(raw, state);
    let mut kept: Vec<(TokenId, F)> = probs.iter().copied().filter(|(_, p)| *p >= config.tau).collect();
    kept.sort_by(rank_order);
    let top = if kept.is_empty() {
        probs.iter().copied().min_by(rank_order)
    } else {
        None
    };
    finish_pool(kept, top, config)
}

fn finish_pool<F: Scalar>(
    mut kept: Vec<(TokenId, F)>,
    top: Option<(TokenId, F)>,
    config: &EmbedConfig<F>,
) -> CandidatePool<F> {
    kept.truncate(config.max_candidates);
    if kept.is_empty() {
        let (token, _) = top.expect("distribution is non-empty");
        return CandidatePool::from_ranked(vec![(token, F::one())]);
    }
    let total = kept.iter().fold(F::zero(), |acc, (_, p)| acc + *p);
    CandidatePool::from_ranked(kept.into_iter().map(|(t, p)| (t, p / total)).collect())
}
