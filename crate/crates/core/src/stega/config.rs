use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::StegaError;
use crate::scalar::Scalar;

/// Hyper-parameters shared by sender and receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig<F = f64> {
    /// Pruning threshold on adjusted probabilities.
    pub tau: F,
    /// Base temperature.
    pub t0: F,
    /// Temperature multiplier applied after a singleton pool.
    pub alpha: F,
    /// Penalty given to a freshly selected token.
    pub delta0: F,
    /// Per-step penalty decay.
    pub beta: F,
    /// Number of covertext sentences placed in the prompt.
    pub context_size: usize,
    pub max_candidates: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl<F: Scalar> Default for EmbedConfig<F> {
    fn default() -> Self {
        Self {
            tau: F::lit(0.005),
            t0: F::lit(1.0),
            alpha: F::lit(1.25),
            delta0: F::lit(4.0),
            beta: F::lit(0.5),
            context_size: 2,
            max_candidates: 64,
            max_tokens: 128,
            seed: 0,
        }
    }
}

impl<F: Scalar> EmbedConfig<F> {
    pub fn validate(&self) -> Result<(), StegaError> {
        let fail = |msg: String| Err(StegaError::InvalidConfig(msg));
        let finite = [self.tau, self.t0, self.alpha, self.delta0, self.beta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return fail("all real-valued parameters must be finite".into());
        }
        if !(self.tau > F::zero() && self.tau < F::one()) {
            return fail(format!("tau must be in (0, 1), got {}", self.tau));
        }
        if !(self.t0 > F::zero()) {
            return fail(format!("t0 must be positive, got {}", self.t0));
        }
        if self.alpha < F::one() {
            return fail(format!("alpha must be at least 1, got {}", self.alpha));
        }
        if self.delta0 < F::zero() {
            return fail(format!("delta0 must be non-negative, got {}", self.delta0));
        }
        if self.beta < F::zero() {
            return fail(format!("beta must be non-negative, got {}", self.beta));
        }
        if self.max_candidates == 0 {
            return fail("max_candidates must be at least 1".into());
        }
        if self.context_size == 0 {
            return fail("context_size must be at least 1".into());
        }
        Ok(())
    }

    /// `key → value` with reals in shortest round-trip form.
    pub fn canonical_pairs(&self) -> BTreeMap<&'static str, String> {
        BTreeMap::from([
            ("tau", self.tau.to_string()),
            ("t0", self.t0.to_string()),
            ("alpha", self.alpha.to_string()),
            ("delta0", self.delta0.to_string()),
            ("beta", self.beta.to_string()),
            ("k", self.context_size.to_string()),
            ("max_candidates", self.max_candidates.to_string()),
            ("max_tokens", self.max_tokens.to_string()),
            ("seed", self.seed.to_string()),
        ])
    }

    /// SHA-256 over the sorted `key=value\n` lines, hex encoded.
    pub fn digest(&self) -> String {
        digest_pairs(self.canonical_pairs().iter().map(|(k, v)| (*k, v.as_str())))
    }
}

pub(crate) fn digest_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in pairs {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}
