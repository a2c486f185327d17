use std::collections::BTreeMap;

use super::adjust::adjusted_pool;
use super::{EmbedConfig, EmbedState, StegaError, StegoEnvelope};
use crate::bits::BitStream;
use crate::codec::{declared_frame_len, HEADER_BITS};
use crate::huffman::{build_codebook, CandidatePool};
use crate::provider::{DistributionProvider, PromptContext};
use crate::scalar::Scalar;
use crate::TokenId;

/// What happened at one generation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<F = f64> {
    /// Temperature used at this step.
    pub temperature: F,
    /// Penalties used at this step.
    pub penalties: BTreeMap<TokenId, F>,
    /// Candidate tokens, pool order.
    pub pool: Vec<TokenId>,
    pub selected: TokenId,
    /// Code of the selected token in this step's codebook.
    pub code: BitStream,
    /// Payload bits consumed (hide) or emitted (extract) at this step.
    pub bits: usize,
    /// False for the zero-bit completion steps after the payload.
    pub embedding: bool,
}

fn candidate_pool<F, P>(
    provider: &P,
    context: &PromptContext,
    state: &EmbedState<F>,
    config: &EmbedConfig<F>,
    allow_eos: bool,
) -> Result<CandidatePool<F>, StegaError>
where
    F: Scalar,
    P: DistributionProvider<F> + ?Sized,
{
    let mut scores = provider.next_scores(context, &state.generated)?;
    if !allow_eos {
        scores = scores.without(provider.eos_token());
    }
    if scores.is_empty() {
        return Err(StegaError::EmptyDistribution {
            step: state.generated.len(),
        });
    }
    if !scores.all_finite() {
        return Err(StegaError::NonFiniteScores {
            step: state.generated.len(),
        });
    }
    Ok(adjusted_pool(&scores, state, config))
}

/// Hides `payload` in a fresh generation conditioned on `context`.
///
/// Each step adjusts the provider scores, prunes, builds a Huffman codebook
/// and picks the token whose code matches the head of the remaining bits.
/// The end-of-sequence token is never a candidate while bits remain. Once the
/// payload is consumed the sentence is finished greedily until
/// end-of-sequence or `max_tokens`.
pub fn hide<F, P>(
    payload: &BitStream,
    provider: &P,
    context: &PromptContext,
    config: &EmbedConfig<F>,
) -> Result<StegoEnvelope, StegaError>
where
    F: Scalar,
    P: DistributionProvider<F> + ?Sized,
{
    run_hide(payload, provider, context, config, None)
}

/// [`hide`], also returning one record per generated token.
pub fn hide_traced<F, P>(
    payload: &BitStream,
    provider: &P,
    context: &PromptContext,
    config: &EmbedConfig<F>,
) -> Result<(StegoEnvelope, Vec<StepRecord<F>>), StegaError>
where
    F: Scalar,
    P: DistributionProvider<F> + ?Sized,
{
    let mut trace = Vec::new();
    let envelope = run_hide(payload, provider, context, config, Some(&mut trace))?;
    Ok((envelope, trace))
}

fn run_hide<F, P>(
    payload: &BitStream,
    provider: &P,
    context: &PromptContext,
    config: &EmbedConfig<F>,
    mut trace: Option<&mut Vec<StepRecord<F>>>,
) -> Result<StegoEnvelope, StegaError>
where
    F: Scalar,
    P: DistributionProvider<F> + ?Sized,
{
    config.validate()?;
    let bits = payload.as_slice();
    let mut state = EmbedState::new(config);

    while state.bits_consumed < bits.len() {
        if state.generated.len() >= config.max_tokens {
            return Err(StegaError::CapacityExceeded {
                max_tokens: config.max_tokens,
                embedded: state.bits_consumed,
                payload: bits.len(),
            });
        }
        let pool = candidate_pool(provider, context, &state, config, false)?;
        let book = build_codebook(&pool);
        let (selected, consumed) = book.match_prefix(&bits[state.bits_consumed..]);
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(StepRecord {
                temperature: state.temperature,
                penalties: state.penalties.clone(),
                pool: pool.tokens().collect(),
                selected,
                code: book.code_of(selected).expect("selected from book").clone(),
                bits: consumed,
                embedding: true,
            });
        }
        state.bits_consumed += consumed;
        state.advance(config, &pool, selected);
    }

    let eos = provider.eos_token();
    while state.generated.len() < config.max_tokens {
        let pool = candidate_pool(provider, context, &state, config, true)?;
        let selected = pool.top();
        if selected == eos {
            break;
        }
        if let Some(trace) = trace.as_deref_mut() {
            let book = build_codebook(&pool);
            trace.push(StepRecord {
                temperature: state.temperature,
                penalties: state.penalties.clone(),
                pool: pool.tokens().collect(),
                selected,
                code: book.code_of(selected).expect("top token in book").clone(),
                bits: 0,
                embedding: false,
            });
        }
        state.advance(config, &pool, selected);
    }

    let text = provider.detokenize(&state.generated)?;
    Ok(StegoEnvelope {
        text,
        tokens: state.generated,
        bits_consumed: state.bits_consumed,
        corpus_id: context.corpus_id.clone(),
        seed: config.seed,
        config_digest: config.digest(),
    })
}

/// Recovers a framed payload from stegotext tokens.
///
/// Replays the sender's pools and emits the code of every token until the
/// frame length announced by the header has been recovered; remaining tokens
/// (the greedy completion) are ignored.
pub fn extract<F, P>(
    tokens: &[TokenId],
    provider: &P,
    context: &PromptContext,
    config: &EmbedConfig<F>,
) -> Result<BitStream, StegaError>
where
    F: Scalar,
    P: DistributionProvider<F> + ?Sized,
{
    extract_traced(tokens, provider, context, config).map(|(bits, _)| bits)
}

pub fn extract_traced<F, P>(
    tokens: &[TokenId],
    provider: &P,
    context: &PromptContext,
    config: &EmbedConfig<F>,
) -> Result<(BitStream, Vec<StepRecord<F>>), StegaError>
where
    F: Scalar,
    P: DistributionProvider<F> + ?Sized,
{
    config.validate()?;
    let mut state = EmbedState::new(config);
    let mut out = BitStream::new();
    let mut needed: Option<usize> = None;
    let mut trace = Vec::new();

    for (step, &token) in tokens.iter().enumerate() {
        if needed.is_some_and(|n| out.len() >= n) {
            break;
        }
        let pool = candidate_pool(provider, context, &state, config, false)?;
        let book = build_codebook(&pool);
        let code = book
            .code_of(token)
            .map_err(|_| StegaError::TokenNotInPool {
                step,
                token,
                pool_size: pool.len(),
            })?
            .clone();
        out.extend_from(&code);
        trace.push(StepRecord {
            temperature: state.temperature,
            penalties: state.penalties.clone(),
            pool: pool.tokens().collect(),
            selected: token,
            code: code.clone(),
            bits: code.len(),
            embedding: true,
        });
        state.advance(config, &pool, token);
        if needed.is_none() {
            needed = declared_frame_len(out.as_slice());
        }
    }

    let needed = needed.unwrap_or(HEADER_BITS);
    if out.len() < needed {
        return Err(StegaError::TruncatedStegotext {
            recovered: out.len(),
            needed,
        });
    }
    out.truncate(needed);
    Ok((out, trace))
}

/// [`extract`] on rendered stegotext, re-tokenized by the provider.
pub fn extract_text<F, P>(
    text: &str,
    provider: &P,
    context: &PromptContext,
    config: &EmbedConfig<F>,
) -> Result<BitStream, StegaError>
where
    F: Scalar,
    P: DistributionProvider<F> + ?Sized,
{
    let tokens = provider.tokenize(text)?;
    extract(&tokens, provider, context, config)
}
