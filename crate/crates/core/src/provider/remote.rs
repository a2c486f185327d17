//! JSON-over-HTTP client for an external inference server.
//!
//! Request: `{"prompt": str, "prefix_tokens": [int], "top_k": int, "deterministic": true}`.
//! Response: `{"tokens": [int], "logprobs": [number], "eos_token": int}`.
//! Tokens outside the returned top-k carry probability zero.

use std::collections::HashMap;
use std::env;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{DistributionProvider, PromptContext, ProviderError, ScoreVector};
use crate::scalar::Scalar;
use crate::TokenId;

pub const ENV_ENDPOINT: &str = "STEGO_LLM_ENDPOINT";
pub const ENV_TOKEN: &str = "STEGO_LLM_TOKEN";
pub const ENV_TIMEOUT_MS: &str = "STEGO_LLM_TIMEOUT_MS";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteSettings {
    pub endpoint: String,
    pub token: Option<String>,
    pub timeout: Duration,
    pub top_k: usize,
    /// Extra attempts after a transport failure.
    pub retries: u32,
}

impl RemoteSettings {
    pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

    pub fn new(endpoint: impl Into<String>, top_k: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            token: None,
            timeout: Duration::from_millis(Self::DEFAULT_TIMEOUT_MS),
            top_k,
            retries: 2,
        }
    }

    /// Reads the endpoint settings from the environment; `None` when no
    /// endpoint is configured.
    pub fn from_env(top_k: usize) -> Result<Option<Self>, ProviderError> {
        let Ok(endpoint) = env::var(ENV_ENDPOINT) else {
            return Ok(None);
        };
        if endpoint.trim().is_empty() {
            return Ok(None);
        }
        let mut settings = Self::new(endpoint.trim(), top_k);
        settings.token = env::var(ENV_TOKEN).ok().filter(|t| !t.is_empty());
        if let Ok(ms) = env::var(ENV_TIMEOUT_MS) {
            let ms: u64 = ms.trim().parse().map_err(|_| {
                ProviderError::Protocol(format!("{ENV_TIMEOUT_MS}={ms:?} is not an integer"))
            })?;
            settings.timeout = Duration::from_millis(ms);
        }
        Ok(Some(settings))
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    prefix_tokens: &'a [TokenId],
    top_k: usize,
    deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct CompletionResponse {
    tokens: Vec<TokenId>,
    logprobs: Vec<f64>,
    eos_token: TokenId,
}

#[derive(Debug, Clone)]
struct WordTable {
    words: Vec<String>,
    index: HashMap<String, TokenId>,
}

#[derive(Debug)]
pub struct RemoteProvider {
    settings: RemoteSettings,
    agent: ureq::Agent,
    eos: TokenId,
    words: Option<WordTable>,
}

impl RemoteProvider {
    /// Connects and runs the determinism probe: the empty-prefix query for
    /// `probe` is issued twice and must return identical answers.
    pub fn connect(settings: RemoteSettings, probe: &PromptContext) -> Result<Self, ProviderError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .build()
            .into();
        let mut provider = Self {
            settings,
            agent,
            eos: 0,
            words: None,
        };
        let first = provider.query(&probe.rendered, &[])?;
        let second = provider.query(&probe.rendered, &[])?;
        if first != second {
            return Err(ProviderError::Nondeterminism(format!(
                "probe returned different answers: first top token {:?}, second {:?}",
                first.tokens.first(),
                second.tokens.first()
            )));
        }
        provider.eos = first.eos_token;
        Ok(provider)
    }

    /// Installs a word-per-token table used to render and re-tokenize text.
    /// Without one, only token ids can be exchanged.
    pub fn with_vocabulary(mut self, words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as TokenId))
            .collect();
        self.words = Some(WordTable { words, index });
        self
    }

    pub fn settings(&self) -> &RemoteSettings {
        &self.settings
    }

    /// Fails if the server cannot supply enough candidates for a pool cap.
    pub fn check_top_k(&self, max_candidates: usize) -> Result<(), ProviderError> {
        if self.settings.top_k < max_candidates {
            return Err(ProviderError::InsufficientTopK {
                requested: max_candidates,
                returned: self.settings.top_k,
            });
        }
        Ok(())
    }

    fn query(&self, prompt: &str, prefix: &[TokenId]) -> Result<CompletionResponse, ProviderError> {
        let body = CompletionRequest {
            prompt,
            prefix_tokens: prefix,
            top_k: self.settings.top_k,
            deterministic: true,
        };
        let mut attempt = 0;
        let response: CompletionResponse = loop {
            let mut request = self.agent.post(&self.settings.endpoint);
            if let Some(token) = &self.settings.token {
                request = request.header("Authorization", &format!("Bearer {token}"));
            }
            match request.send_json(&body) {
                Ok(mut resp) => {
                    break resp.body_mut().read_json().map_err(|e| {
                        ProviderError::Protocol(format!("unparseable response: {e}"))
                    })?;
                }
                Err(ureq::Error::StatusCode(code)) if code < 500 => {
                    return Err(ProviderError::Unavailable(format!("server answered HTTP {code}")));
                }
                Err(e) if attempt < self.settings.retries => {
                    attempt += 1;
                    warn!("remote provider attempt {attempt} failed: {e}; retrying");
                    thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
                }
                Err(e) => return Err(ProviderError::Unavailable(e.to_string())),
            }
        };
        debug!("remote provider returned {} entries", response.tokens.len());
        if response.tokens.len() != response.logprobs.len() {
            return Err(ProviderError::Protocol(format!(
                "{} tokens but {} logprobs",
                response.tokens.len(),
                response.logprobs.len()
            )));
        }
        if response.tokens.len() < self.settings.top_k {
            return Err(ProviderError::InsufficientTopK {
                requested: self.settings.top_k,
                returned: response.tokens.len(),
            });
        }
        if response.logprobs.iter().any(|l| !l.is_finite()) {
            return Err(ProviderError::Protocol("non-finite logprob".into()));
        }
        Ok(response)
    }
}

impl<F: Scalar> DistributionProvider<F> for RemoteProvider {
    fn vocab_size(&self) -> usize {
        self.words.as_ref().map_or(0, |w| w.words.len())
    }

    fn eos_token(&self) -> TokenId {
        self.eos
    }

    fn next_scores(
        &self,
        context: &PromptContext,
        prefix: &[TokenId],
    ) -> Result<ScoreVector<F>, ProviderError> {
        let response = self.query(&context.rendered, prefix)?;
        if response.eos_token != self.eos {
            return Err(ProviderError::Nondeterminism(format!(
                "end-of-sequence token changed from {} to {}",
                self.eos, response.eos_token
            )));
        }
        Ok(ScoreVector::from_sparse(
            response
                .tokens
                .into_iter()
                .zip(response.logprobs)
                .map(|(t, l)| (t, F::lit(l)))
                .collect(),
        ))
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, ProviderError> {
        let table = self.words.as_ref().ok_or(ProviderError::Unsupported("tokenization"))?;
        text.split_whitespace()
            .map(|w| {
                table.index.get(w).copied().ok_or_else(|| {
                    ProviderError::VocabularyMismatch(format!("word {w:?} not in vocabulary"))
                })
            })
            .collect()
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ProviderError> {
        let table = self.words.as_ref().ok_or(ProviderError::Unsupported("detokenization"))?;
        tokens
            .iter()
            .filter(|&&t| t != self.eos)
            .map(|&t| {
                table.words.get(t as usize).map(String::as_str).ok_or_else(|| {
                    ProviderError::VocabularyMismatch(format!("token id {t} out of range"))
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|w| w.join(" "))
    }
}
