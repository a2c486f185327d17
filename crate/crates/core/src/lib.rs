//! Generative linguistic steganography over next-token distributions.
//!
//! A secret text is compressed into a bitstream, recoded with multi-round
//! edge flipping so that zeros dominate, framed with a small header, and then
//! embedded token by token: at every step the provider's distribution is
//! tempered and penalised, pruned by a probability threshold, and turned into
//! a Huffman tree whose codeword matching the head of the remaining bits picks
//! the next token. Extraction replays the same sequence of trees.
//!
//! The numeric core is generic over the floating-point type through
//! [`Scalar`]; the Huffman builder accepts any [`Weight`] (floats, integer
//! counts, exact rationals). Concrete `f64`/`f32` aliases live at the crate
//! root.

pub mod bits;
pub mod codec;
pub mod huffman;
pub mod metrics;
pub mod pipeline;
pub mod provider;
pub mod scalar;
pub mod stega;

/// Index into a provider vocabulary.
pub type TokenId = u32;

pub use bits::BitStream;
pub use codec::{CodecError, CodecId, FrequencyTable, SecretPayload};
pub use huffman::{CandidatePool, HuffmanCodebook, HuffmanError};
pub use metrics::{BpwReport, JsdReport, MetricsError};
pub use provider::{
    DistributionProvider, InContextModel, NgramModel, PromptContext, ProviderError,
    RemoteProvider, ScoreVector, UniformProvider, Vocabulary,
};
pub use scalar::{Scalar, Weight};
pub use stega::{EmbedConfig, EmbedState, StegaError, StegoEnvelope, TokenDistribution};

pub type EmbedConfig64 = EmbedConfig<f64>;
pub type EmbedConfig32 = EmbedConfig<f32>;
pub type EmbedState64 = EmbedState<f64>;
pub type EmbedState32 = EmbedState<f32>;
pub type TokenDistribution64 = TokenDistribution<f64>;
pub type TokenDistribution32 = TokenDistribution<f32>;
pub type ScoreVector64 = ScoreVector<f64>;
pub type ScoreVector32 = ScoreVector<f32>;
pub type JsdReport64 = JsdReport<f64>;
pub type JsdReport32 = JsdReport<f32>;
