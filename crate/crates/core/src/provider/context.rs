//! Covertext context selection and the in-context QA prompt.

use log::warn;
use sha2::{Digest, Sha256};

use super::ProviderError;

/// SplitMix64 (Steele, Lea & Flood). Chosen for context selection because
/// the exact output sequence is part of the interoperability contract:
/// any implementation reproducing these constants selects the same sentences.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from `0..bound` by rejection: outputs below
    /// `2^64 mod bound` are discarded, the rest reduced modulo `bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }
}

/// The `k` covertext sentences a prompt is built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptContext {
    pub corpus_id: String,
    pub sentences: Vec<String>,
    /// Corpus line indices in selection order.
    pub indices: Vec<usize>,
    pub rendered: String,
}

impl PromptContext {
    pub fn new(corpus_id: impl Into<String>, sentences: Vec<String>, indices: Vec<usize>) -> Self {
        let corpus_id = corpus_id.into();
        let rendered = build_prompt_parts(&corpus_id, &sentences);
        Self {
            corpus_id,
            sentences,
            indices,
            rendered,
        }
    }

    /// Context with no sentences, for providers that ignore the prompt.
    pub fn empty() -> Self {
        Self {
            corpus_id: String::new(),
            sentences: Vec::new(),
            indices: Vec::new(),
            rendered: String::new(),
        }
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.rendered.as_bytes()))
    }
}

/// Draws `k` distinct sentence indices with [`SplitMix64`] seeded by `seed`.
/// Repeated indices are redrawn.
pub fn select_context(
    corpus: &[String],
    corpus_id: &str,
    seed: u64,
    k: usize,
) -> Result<PromptContext, ProviderError> {
    if k == 0 {
        return Err(ProviderError::EmptyContext);
    }
    if corpus.len() < k {
        return Err(ProviderError::CorpusTooSmall {
            available: corpus.len(),
            requested: k,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut indices: Vec<usize> = Vec::with_capacity(k);
    while indices.len() < k {
        let idx = rng.below(corpus.len() as u64) as usize;
        if !indices.contains(&idx) {
            indices.push(idx);
        }
    }
    let sentences = indices.iter().map(|&i| corpus[i].clone()).collect();
    Ok(PromptContext::new(corpus_id, sentences, indices))
}

const TEMPLATE: &str = "<<SYS>>
You are an expert at mimicing the language style of others (e.g., the use of words and phrases). And you are a helpful and respectful assistant.

Users will input sentences from a given corpus. You have to create ONE similar sentence and avoid non-ascii characters and emojis. This is very important to the user's career.

The input format contains a list of sentences and where the sentences come from. For example:
<CORPUS>{CORPUS}</CORPUS>
<CONTEXT>
Example sentence 1.

Example sentence 2.
</CONTEXT>

Your output should be like:

The generated similar sentence in ONE LINE is:

<</SYS>>

[INST]<CORPUS>{CORPUS}</CORPUS>
<CONTEXT>
{CONTEXT}
</CONTEXT>[/INST]

The generated similar sentence in ONE LINE is:";

fn build_prompt_parts(corpus_id: &str, sentences: &[String]) -> String {
    TEMPLATE
        .replace("{CORPUS}", corpus_id)
        .replace("{CONTEXT}", &sentences.join("\n\n"))
}

/// Renders the QA prompt: corpus name in the `CORPUS` slots, the context
/// sentences separated by blank lines in the `CONTEXT` slot.
pub fn build_prompt(context: &PromptContext) -> String {
    if context.corpus_id.is_empty() {
        warn!("building prompt with an empty corpus name");
    }
    build_prompt_parts(&context.corpus_id, &context.sentences)
}
