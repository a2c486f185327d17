//! End-to-end plumbing: secret text in, envelope files out, and back.

mod config;
mod corpus;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::bits::BitStream;
use crate::codec::{
    ef_decode_rounds, ef_multiround, frame_payload, unframe_payload, CodecError, CodecId,
    TextCodec, HEADER_BITS,
};
use crate::metrics::{self, count_words, BpwReport, JsdReport, MetricsError};
use crate::provider::{
    select_context, DistributionProvider, InContextModel, NgramModel, PromptContext,
    ProviderError, RemoteProvider, RemoteSettings, Vocabulary,
};
use crate::stega::{self, EmbedConfig, Sidecar, StegaError, StegoEnvelope};
use crate::TokenId;

pub use config::{ProviderKind, RunConfig};
pub use corpus::{split_sentences, PreparedCorpus, DIGEST_FILE, FREQUENCY_FILE, SENTENCES_FILE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corpus contains no sentences")]
    EmptyCorpus,
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Stega(#[from] StegaError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("envelope {index}: {source}")]
    Envelope {
        index: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("no envelopes given")]
    NoEnvelopes,
    #[error("envelope chain is broken: {0}")]
    BrokenChain(String),
}

/// Exit codes, one per error kind. `2` is left to argument parsing.
pub const EXIT_CODES: &[(&str, i32)] = &[
    ("config", 3),
    ("io", 4),
    ("empty-corpus", 5),
    ("codec", 6),
    ("capacity-exceeded", 7),
    ("token-not-in-pool", 8),
    ("truncated-stegotext", 9),
    ("stega", 10),
    ("provider", 11),
    ("metrics", 12),
    ("chain", 13),
];

impl PipelineError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn at(index: usize) -> impl FnOnce(PipelineError) -> PipelineError {
        move |e| PipelineError::Envelope {
            index,
            source: Box::new(e),
        }
    }

    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::EmptyCorpus => "empty-corpus",
            Self::Config(_) => "config",
            Self::Codec(_) => "codec",
            Self::Stega(StegaError::InvalidConfig(_)) => "config",
            Self::Stega(StegaError::CapacityExceeded { .. }) => "capacity-exceeded",
            Self::Stega(StegaError::TokenNotInPool { .. }) => "token-not-in-pool",
            Self::Stega(StegaError::TruncatedStegotext { .. }) => "truncated-stegotext",
            Self::Stega(StegaError::Provider(_)) | Self::Provider(_) => "provider",
            Self::Stega(_) => "stega",
            Self::Metrics(MetricsError::Provider(_)) => "provider",
            Self::Metrics(_) => "metrics",
            Self::Envelope { source, .. } => source.kind(),
            Self::NoEnvelopes | Self::BrokenChain(_) => "chain",
        }
    }

    pub fn exit_code(&self) -> i32 {
        let kind = self.kind();
        EXIT_CODES
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, c)| *c)
            .expect("every kind has an exit code")
    }

    /// Index of the envelope the error occurred in, if any.
    pub fn envelope_index(&self) -> Option<usize> {
        match self {
            Self::Envelope { index, .. } => Some(*index),
            _ => None,
        }
    }
}

/// Builds the provider named by `config` over `corpus`.
///
/// The toy provider is an n-gram model trained on the corpus, mixed with the
/// prompt's context sentences. The remote provider reads its endpoint from
/// the environment and is probed for determinism before use.
pub fn build_provider(
    config: &RunConfig,
    corpus: &PreparedCorpus,
) -> Result<Box<dyn DistributionProvider<f64>>, PipelineError> {
    config.validate()?;
    match config.provider {
        ProviderKind::Toy => {
            let base = NgramModel::train_with(
                corpus.sentences.iter().map(String::as_str),
                config.ngram_order,
                config.smoothing,
            );
            Ok(Box::new(InContextModel::with_weight(base, config.context_weight)))
        }
        ProviderKind::Remote => {
            let settings = RemoteSettings::from_env(config.top_k)?.ok_or_else(|| {
                PipelineError::Config(format!(
                    "remote provider selected but {} is not set",
                    crate::provider::ENV_ENDPOINT
                ))
            })?;
            let probe = context_for(config, corpus, 0)?;
            let mut provider = RemoteProvider::connect(settings, &probe)?;
            provider.check_top_k(config.embed.max_candidates)?;
            if let Some(path) = &config.vocabulary {
                let words = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
                provider = provider.with_vocabulary(words.lines().map(String::from).collect());
            }
            Ok(Box::new(provider))
        }
    }
}

/// Seed used for envelope `index` of a chain.
pub fn envelope_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

fn embed_for(config: &RunConfig, index: usize) -> EmbedConfig<f64> {
    EmbedConfig {
        seed: envelope_seed(config.embed.seed, index),
        ..config.embed.clone()
    }
}

fn context_for(
    config: &RunConfig,
    corpus: &PreparedCorpus,
    index: usize,
) -> Result<PromptContext, PipelineError> {
    Ok(select_context(
        &corpus.sentences,
        &config.corpus_id,
        envelope_seed(config.embed.seed, index),
        config.embed.context_size,
    )?)
}

/// Compresses, EF-codes and hides `secret`, splitting the coded body across
/// several envelopes when one generation cannot carry it. Envelope `i` uses
/// context seed `seed + i`; every envelope repeats the EF round count and
/// codec in its own header.
pub fn hide_secret<P>(
    secret: &str,
    config: &RunConfig,
    corpus: &PreparedCorpus,
    provider: &P,
) -> Result<Vec<StegoEnvelope>, PipelineError>
where
    P: DistributionProvider<f64> + ?Sized,
{
    config.validate()?;
    let codec = TextCodec::new(&corpus.table, config.codec);
    let compressed = codec.compress(secret);
    let (body, rounds) = ef_multiround(&compressed, config.max_ef_rounds);
    info!(
        "secret: {} bytes, {} compressed bits, {} EF rounds ({} -> {} ones)",
        secret.len(),
        compressed.len(),
        rounds,
        compressed.count_ones(),
        body.count_ones()
    );

    let mut envelopes = Vec::new();
    let mut offset = 0;
    loop {
        let index = envelopes.len();
        let embed = embed_for(config, index);
        let context = context_for(config, corpus, index).map_err(PipelineError::at(index))?;
        let mut take = body.len() - offset;
        let envelope = loop {
            let frame = frame_payload(&body.slice(offset..offset + take), rounds, config.codec)?;
            match stega::hide(&frame, provider, &context, &embed) {
                Ok(envelope) => break envelope,
                Err(StegaError::CapacityExceeded { embedded, .. }) if take > 0 => {
                    let fits = embedded.saturating_sub(HEADER_BITS).min(take - 1);
                    if fits == 0 {
                        return Err(PipelineError::at(index)(
                            StegaError::CapacityExceeded {
                                max_tokens: embed.max_tokens,
                                embedded,
                                payload: frame.len(),
                            }
                            .into(),
                        ));
                    }
                    take = fits;
                }
                Err(e) => return Err(PipelineError::at(index)(e.into())),
            }
        };
        info!(
            "envelope {index}: {} body bits in {} tokens",
            take,
            envelope.tokens.len()
        );
        envelopes.push(envelope);
        offset += take;
        if offset >= body.len() {
            break;
        }
    }
    Ok(envelopes)
}

/// One received envelope: its stegotext and sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedEnvelope {
    pub text: String,
    pub sidecar: Sidecar,
}

impl ReceivedEnvelope {
    pub fn from_envelopes(envelopes: &[StegoEnvelope]) -> Vec<Self> {
        envelopes
            .iter()
            .enumerate()
            .map(|(i, e)| Self {
                text: e.text.clone(),
                sidecar: Sidecar::for_envelope(e, i, envelopes.len()),
            })
            .collect()
    }
}

/// Puts envelopes in sequence order and checks the chain is complete.
fn order_chain(envelopes: &[ReceivedEnvelope]) -> Result<Vec<&ReceivedEnvelope>, PipelineError> {
    if envelopes.is_empty() {
        return Err(PipelineError::NoEnvelopes);
    }
    let mut ordered: Vec<&ReceivedEnvelope> = envelopes.iter().collect();
    ordered.sort_by_key(|e| e.sidecar.sequence);
    let count = ordered[0].sidecar.count;
    if ordered.len() != count {
        return Err(PipelineError::BrokenChain(format!(
            "expected {count} envelopes, got {}",
            ordered.len()
        )));
    }
    for (i, e) in ordered.iter().enumerate() {
        if e.sidecar.sequence != i || e.sidecar.count != count {
            return Err(PipelineError::BrokenChain(format!(
                "envelope at position {i} has sequence {} of {}",
                e.sidecar.sequence, e.sidecar.count
            )));
        }
    }
    Ok(ordered)
}

/// Recovers the framed bits of one envelope, replaying generation with the
/// receiver's own config. A sidecar that disagrees is reported but not
/// trusted.
fn extract_frame<P>(
    envelope: &ReceivedEnvelope,
    config: &RunConfig,
    corpus: &PreparedCorpus,
    provider: &P,
) -> Result<(BitStream, Vec<TokenId>), PipelineError>
where
    P: DistributionProvider<f64> + ?Sized,
{
    let index = envelope.sidecar.sequence;
    let embed = embed_for(config, index);
    if envelope.sidecar.seed != embed.seed {
        warn!(
            "envelope {index}: sidecar seed {} differs from configured seed {}",
            envelope.sidecar.seed, embed.seed
        );
    }
    if envelope.sidecar.config_digest != embed.digest() {
        warn!("envelope {index}: sidecar config digest differs from the local config");
    }
    let context = context_for(config, corpus, index)?;
    let tokens = provider.tokenize(&envelope.text)?;
    let frame = stega::extract(&tokens, provider, &context, &embed)?;
    Ok((frame, tokens))
}

/// Inverse of [`hide_secret`].
pub fn extract_secret<P>(
    envelopes: &[ReceivedEnvelope],
    config: &RunConfig,
    corpus: &PreparedCorpus,
    provider: &P,
) -> Result<String, PipelineError>
where
    P: DistributionProvider<f64> + ?Sized,
{
    config.validate()?;
    let ordered = order_chain(envelopes)?;
    let mut body = BitStream::new();
    let mut shape: Option<(u8, CodecId)> = None;
    for envelope in ordered {
        let index = envelope.sidecar.sequence;
        let (frame, _) =
            extract_frame(envelope, config, corpus, provider).map_err(PipelineError::at(index))?;
        let payload = unframe_payload(&frame).map_err(|e| PipelineError::at(index)(e.into()))?;
        match shape {
            None => shape = Some((payload.ef_rounds, payload.codec_id)),
            Some(s) if s != (payload.ef_rounds, payload.codec_id) => {
                return Err(PipelineError::BrokenChain(format!(
                    "envelope {index} declares {} EF rounds and codec {}, expected {} and {}",
                    payload.ef_rounds, payload.codec_id, s.0, s.1
                )))
            }
            Some(_) => {}
        }
        body.extend_from(&payload.body);
    }
    let (rounds, codec_id) = shape.expect("at least one envelope");
    let compressed = ef_decode_rounds(&body, rounds);
    Ok(TextCodec::new(&corpus.table, codec_id).decompress(&compressed)?)
}

fn envelope_stem(index: usize) -> String {
    format!("envelope-{index:03}")
}

/// Writes `envelope-NNN.txt` (stegotext) and `envelope-NNN.meta` (sidecar)
/// per envelope. Returns the text file paths.
pub fn write_envelopes(dir: &Path, envelopes: &[StegoEnvelope]) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut written = Vec::new();
    for (i, received) in ReceivedEnvelope::from_envelopes(envelopes).iter().enumerate() {
        let stem = envelope_stem(i);
        let text_path = dir.join(format!("{stem}.txt"));
        let meta_path = dir.join(format!("{stem}.meta"));
        fs::write(&text_path, format!("{}\n", received.text))
            .map_err(|e| PipelineError::io(&text_path, e))?;
        fs::write(&meta_path, received.sidecar.render())
            .map_err(|e| PipelineError::io(&meta_path, e))?;
        written.push(text_path);
    }
    Ok(written)
}

/// Reads envelopes from text files (with a `.meta` next to each) or from a
/// directory of `envelope-*.txt` files.
pub fn read_envelopes(paths: &[PathBuf]) -> Result<Vec<ReceivedEnvelope>, PipelineError> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| PipelineError::io(path, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension().is_some_and(|x| x == "txt")
                        && p.file_name()
                            .and_then(|n| n.to_str())
                            .is_some_and(|n| n.starts_with("envelope-"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    files
        .iter()
        .map(|text_path| {
            let meta_path = text_path.with_extension("meta");
            let text = fs::read_to_string(text_path).map_err(|e| PipelineError::io(text_path, e))?;
            let meta = fs::read_to_string(&meta_path).map_err(|e| PipelineError::io(&meta_path, e))?;
            Ok(ReceivedEnvelope {
                text: text.trim_end_matches(['\n', '\r']).to_string(),
                sidecar: Sidecar::parse(&meta)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub envelopes: usize,
    pub bpw: BpwReport,
    /// Mean over envelopes of each envelope's perplexity under the provider,
    /// given the prompt it was generated from.
    pub perplexity: Option<f64>,
    /// Bigram trained on the covertext against a bigram trained on the
    /// stegotexts, averaged over the stegotext positions.
    pub jsd: Option<JsdReport<f64>>,
}

impl EvalReport {
    /// `key\tvalue` lines, absent metrics omitted.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "envelopes\t{}\ntotal_bits\t{}\ntotal_words\t{}\nbpw\t{}\n",
            self.envelopes, self.bpw.total_bits, self.bpw.total_words, self.bpw.bpw
        );
        if let Some(ppl) = self.perplexity {
            out.push_str(&format!("perplexity\t{ppl}\n"));
        }
        if let Some(j) = &self.jsd {
            out.push_str(&format!("jsd\t{}\njsd_positions\t{}\n", j.jsd, j.positions));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub perplexity: bool,
    pub jsd: bool,
}

/// Re-extracts every envelope to count the bits it carries, then reports
/// bits per word and the optional metrics.
pub fn evaluate<P>(
    envelopes: &[ReceivedEnvelope],
    config: &RunConfig,
    corpus: &PreparedCorpus,
    provider: &P,
    options: EvalOptions,
) -> Result<EvalReport, PipelineError>
where
    P: DistributionProvider<f64> + ?Sized,
{
    config.validate()?;
    if envelopes.is_empty() {
        return Err(PipelineError::NoEnvelopes);
    }
    let mut counts = Vec::with_capacity(envelopes.len());
    let mut ppl_sum = 0.0;
    let mut samples = Vec::with_capacity(envelopes.len());
    for envelope in envelopes {
        let index = envelope.sidecar.sequence;
        let (frame, tokens) =
            extract_frame(envelope, config, corpus, provider).map_err(PipelineError::at(index))?;
        counts.push((frame.len(), count_words(&envelope.text)));
        if options.perplexity {
            let context = context_for(config, corpus, index)?;
            let ppl: f64 = metrics::perplexity(&tokens, provider, &context)
                .map_err(|e| PipelineError::at(index)(e.into()))?;
            ppl_sum += ppl;
        }
        samples.push(envelope.text.clone());
    }
    let bpw = metrics::bpw_from_counts(counts)?;
    let perplexity = options.perplexity.then(|| ppl_sum / envelopes.len() as f64);
    let jsd = if options.jsd {
        Some(cover_stego_jsd(config, corpus, &samples)?)
    } else {
        None
    };
    Ok(EvalReport {
        envelopes: envelopes.len(),
        bpw,
        perplexity,
        jsd,
    })
}

fn cover_stego_jsd(
    config: &RunConfig,
    corpus: &PreparedCorpus,
    stego: &[String],
) -> Result<JsdReport<f64>, PipelineError> {
    let all = corpus.sentences.iter().chain(stego).map(String::as_str);
    let vocab = Vocabulary::from_sentences(all);
    let train = |sentences: &[String]| {
        NgramModel::train_with_vocab(
            sentences.iter().map(String::as_str),
            vocab.clone(),
            config.ngram_order,
            config.smoothing,
        )
    };
    let cover = train(&corpus.sentences)?;
    let stego_model = train(stego)?;
    let samples = stego
        .iter()
        .map(|s| vocab.encode(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(metrics::corpus_jsd(&cover, &stego_model, &PromptContext::empty(), &samples)?)
}
