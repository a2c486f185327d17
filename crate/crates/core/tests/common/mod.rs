#![allow(dead_code)]

use std::path::PathBuf;

use lmsteg_core::pipeline::PreparedCorpus;
use lmsteg_core::provider::{InContextModel, NgramModel};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn reviews() -> PreparedCorpus {
    let text = std::fs::read_to_string(data_path("reviews.txt")).unwrap();
    PreparedCorpus::from_text(&text).unwrap()
}

pub fn bigram(corpus: &PreparedCorpus) -> NgramModel {
    NgramModel::train(corpus.sentences.iter().map(String::as_str))
}

/// Bigram over the corpus, conditioned on the prompt sentences.
pub fn toy(corpus: &PreparedCorpus) -> InContextModel<NgramModel> {
    InContextModel::new(bigram(corpus))
}

pub mod mock;
pub mod oracle;
