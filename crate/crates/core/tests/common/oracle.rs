use std::collections::BTreeMap;

use lmsteg_core::huffman::HuffmanCodebook;
use lmsteg_core::stega::StepRecord;
use lmsteg_core::{EmbedConfig, TokenId};
use num_rational::Ratio;
use num_traits::{One, Zero};

pub type Q = Ratio<i128>;

/// Smallest `Σ w_i·l_i` over all length vectors admitting a prefix code
/// (Kraft sum ≤ 1). Weights must be sorted descending; lengths are then
/// non-decreasing without loss of generality.
pub fn brute_force_optimum(weights: &[u64]) -> u64 {
    fn go(weights: &[u64], i: usize, min_len: u32, kraft: Q, cost: u64, best: &mut u64) {
        if cost >= *best {
            return;
        }
        if i == weights.len() {
            *best = cost;
            return;
        }
        let max_len = weights.len() as u32 - 1;
        for len in min_len..=max_len.max(min_len) {
            let k = kraft + Q::new(1, 1i128 << len);
            if k > Q::one() {
                continue;
            }
            go(weights, i + 1, len, k, cost + weights[i] * u64::from(len), best);
        }
    }
    if weights.len() == 1 {
        return 0;
    }
    let mut best = u64::MAX;
    go(weights, 0, 1, Q::zero(), 0, &mut best);
    best
}

pub fn kraft_sum(book: &HuffmanCodebook) -> Q {
    book.codes()
        .map(|(_, c)| Q::new(1, 1i128 << c.len()))
        .fold(Q::zero(), |a, b| a + b)
}

/// First pair of codes where one prefixes the other.
pub fn prefix_violation(book: &HuffmanCodebook) -> Option<(String, String)> {
    let codes: Vec<_> = book.codes().map(|(_, c)| c.to_string()).collect();
    for (i, a) in codes.iter().enumerate() {
        for (j, b) in codes.iter().enumerate() {
            if i != j && b.starts_with(a.as_str()) {
                return Some((a.clone(), b.clone()));
            }
        }
    }
    None
}

/// Checks one hide trace against the temperature and penalty recurrences
/// with exact float comparison.
pub fn check_recurrences(trace: &[StepRecord<f64>], config: &EmbedConfig<f64>) -> Result<(), String> {
    let first = trace.first().ok_or("empty trace")?;
    if first.temperature != config.t0 || !first.penalties.is_empty() {
        return Err(format!("step 0 starts at T={} with {:?}", first.temperature, first.penalties));
    }
    for (step, w) in trace.windows(2).enumerate() {
        let (prev, cur) = (&w[0], &w[1]);
        let expected_t = if prev.pool.len() == 1 {
            config.alpha * prev.temperature
        } else {
            config.t0
        };
        if cur.temperature != expected_t {
            return Err(format!("step {}: T={} expected {expected_t}", step + 1, cur.temperature));
        }

        let mut expected: BTreeMap<TokenId, f64> = prev.penalties.clone();
        for &t in &prev.pool {
            let old = prev.penalties.get(&t).copied().unwrap_or(0.0);
            let new = if t == prev.selected {
                config.delta0
            } else {
                (old - config.beta).max(0.0)
            };
            expected.insert(t, new);
        }
        expected.retain(|_, v| *v != 0.0);
        if cur.penalties != expected {
            return Err(format!("step {}: δ={:?} expected {expected:?}", step + 1, cur.penalties));
        }
        if cur.penalties.values().any(|&d| !(0.0..=config.delta0).contains(&d)) {
            return Err(format!("step {}: δ out of range", step + 1));
        }
    }
    Ok(())
}
