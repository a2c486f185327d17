//! Covertext corpus preparation: sentence splitting, byte frequencies, digest.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::codec::FrequencyTable;

pub const SENTENCES_FILE: &str = "sentences.txt";
pub const FREQUENCY_FILE: &str = "frequency.tsv";
pub const DIGEST_FILE: &str = "corpus.sha256";

/// Splits after `.`, `!` or `?` when followed by whitespace (or the end of
/// input). Sentences are trimmed, internal whitespace runs collapse to one
/// space, and empty pieces are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        let boundary = matches!(c, '.' | '!' | '?')
            && chars.peek().map_or(true, |n| n.is_whitespace());
        if boundary {
            push_sentence(&mut sentences, &current);
            current.clear();
        }
    }
    push_sentence(&mut sentences, &current);
    sentences
}

fn push_sentence(out: &mut Vec<String>, raw: &str) {
    let normalized = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if !normalized.is_empty() {
        out.push(normalized);
    }
}

/// A covertext corpus as both parties hold it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedCorpus {
    pub sentences: Vec<String>,
    pub table: FrequencyTable,
    /// SHA-256 of the sentence file, hex.
    pub digest: String,
}

impl PreparedCorpus {
    pub fn from_text(text: &str) -> Result<Self, PipelineError> {
        Self::from_sentences(split_sentences(text))
    }

    /// Uses already split sentences (one per entry) as they are.
    pub fn from_sentences(sentences: Vec<String>) -> Result<Self, PipelineError> {
        if sentences.is_empty() {
            return Err(PipelineError::EmptyCorpus);
        }
        let file = sentences_file(&sentences);
        Ok(Self {
            table: FrequencyTable::from_corpus(file.as_bytes()),
            digest: hex::encode(Sha256::digest(file.as_bytes())),
            sentences,
        })
    }

    pub fn sentences_file(&self) -> String {
        sentences_file(&self.sentences)
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        let write = |name: &str, contents: String| {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| PipelineError::io(&path, e))
        };
        write(SENTENCES_FILE, self.sentences_file())?;
        write(FREQUENCY_FILE, self.table.to_tsv())?;
        write(DIGEST_FILE, format!("{}\n", self.digest))?;
        Ok(())
    }

    /// Loads a prepared directory, or a plain one-sentence-per-line file.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        if path.is_dir() {
            let sentences_path = path.join(SENTENCES_FILE);
            let text = fs::read_to_string(&sentences_path)
                .map_err(|e| PipelineError::io(&sentences_path, e))?;
            let corpus = Self::from_sentences(lines(&text))?;
            let table_path = path.join(FREQUENCY_FILE);
            if table_path.exists() {
                let tsv = fs::read_to_string(&table_path).map_err(|e| PipelineError::io(&table_path, e))?;
                let table = FrequencyTable::parse_tsv(&tsv)?;
                return Ok(Self { table, ..corpus });
            }
            Ok(corpus)
        } else {
            let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
            Self::from_sentences(lines(&text))
        }
    }
}

fn lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn sentences_file(sentences: &[String]) -> String {
    let mut out = sentences.join("\n");
    out.push('\n');
    out
}
