mod common;

use std::fs;
use std::path::Path;

use lmsteg_core::codec::{unframe_payload, HEADER_BITS};
use lmsteg_core::metrics::count_words;
use lmsteg_core::provider::select_context;
use lmsteg_core::stega::extract;
use lmsteg_core::pipeline::{
    build_provider, evaluate, extract_secret, hide_secret, read_envelopes, write_envelopes,
    EvalOptions, PreparedCorpus, ReceivedEnvelope, RunConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::default();
    c.corpus_id = "reviews".into();
    c.embed.seed = seed;
    c
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn run_once(root: &Path, secret: &str) -> String {
    let text = fs::read_to_string(common::data_path("reviews.txt")).unwrap();
    let prepared = PreparedCorpus::from_text(&text).unwrap();
    prepared.write_to(&root.join("corpus")).unwrap();
    let corpus = PreparedCorpus::load(&root.join("corpus")).unwrap();
    let config = run_config(2024);
    let provider = build_provider(&config, &corpus).unwrap();
    let envelopes = hide_secret(secret, &config, &corpus, &*provider).unwrap();
    write_envelopes(&root.join("out"), &envelopes).unwrap();
    let received = read_envelopes(&[root.join("out")]).unwrap();
    extract_secret(&received, &config, &corpus, &*provider).unwrap()
}

#[test]
fn two_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let secret = "meet me at the old mill at nine";
    assert_eq!(run_once(a.path(), secret), secret);
    assert_eq!(run_once(b.path(), secret), secret);
    for sub in ["corpus", "out"] {
        assert_eq!(snapshot(&a.path().join(sub)), snapshot(&b.path().join(sub)));
    }
}

#[test]
fn prepared_digest_is_stable() {
    let text = fs::read_to_string(common::data_path("reviews.txt")).unwrap();
    let first = PreparedCorpus::from_text(&text).unwrap();
    let again = PreparedCorpus::from_text(&text).unwrap();
    assert_eq!(first.digest, again.digest);
    assert!(first.sentences.len() >= 100);
    assert!(first.table.total() >= first.sentences.len() as u64);
}

#[test]
fn random_secrets_round_trip() {
    let corpus = common::reviews();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..25 {
        let config = run_config(i);
        let provider = build_provider(&config, &corpus).unwrap();
        let len = rng.gen_range(0..40);
        let secret: String = (0..len).map(|_| rng.gen_range(' '..='~')).collect();
        let envelopes = hide_secret(&secret, &config, &corpus, &*provider).unwrap();
        let received = ReceivedEnvelope::from_envelopes(&envelopes);
        assert_eq!(extract_secret(&received, &config, &corpus, &*provider).unwrap(), secret);
    }
}

#[test]
fn empty_secret_is_one_header_only_envelope() {
    let corpus = common::reviews();
    let config = run_config(1);
    let provider = build_provider(&config, &corpus).unwrap();
    let envelopes = hide_secret("", &config, &corpus, &*provider).unwrap();
    assert_eq!(envelopes.len(), 1);
    assert_eq!(envelopes[0].bits_consumed, HEADER_BITS);
    let received = ReceivedEnvelope::from_envelopes(&envelopes);
    assert_eq!(extract_secret(&received, &config, &corpus, &*provider).unwrap(), "");
}

#[test]
fn small_max_tokens_forces_a_chain() {
    let corpus = common::reviews();
    let mut config = run_config(5);
    config.embed.max_tokens = 32;
    let provider = build_provider(&config, &corpus).unwrap();
    let secret = "the quick brown fox jumps over the lazy dog, twice over";
    let envelopes = hide_secret(secret, &config, &corpus, &*provider).unwrap();
    assert!(envelopes.len() >= 2, "{} envelopes", envelopes.len());
    assert!(envelopes.iter().all(|e| e.tokens.len() <= 32));
    for (i, e) in envelopes.iter().enumerate() {
        assert_eq!(e.seed, 5 + i as u64);
    }
    let received = ReceivedEnvelope::from_envelopes(&envelopes);
    assert_eq!(extract_secret(&received, &config, &corpus, &*provider).unwrap(), secret);
}

#[test]
fn wrong_seed_names_the_envelope_and_pool_failure() {
    let corpus = common::reviews();
    let config = run_config(10);
    let provider = build_provider(&config, &corpus).unwrap();
    let envelopes = hide_secret("attack at dawn", &config, &corpus, &*provider).unwrap();
    let received = ReceivedEnvelope::from_envelopes(&envelopes);
    let err = extract_secret(&received, &run_config(11), &corpus, &*provider).unwrap_err();
    assert_eq!(err.kind(), "token-not-in-pool");
    assert_eq!(err.envelope_index(), Some(0));
    assert_eq!(err.exit_code(), 8);
}

#[test]
fn eval_reports_framed_bits_per_word() {
    let corpus = common::reviews();
    let config = run_config(3);
    let provider = build_provider(&config, &corpus).unwrap();
    let mut all = Vec::new();
    for secret in ["one", "two secrets", "and a third one here"] {
        let envelopes = hide_secret(secret, &config, &corpus, &*provider).unwrap();
        all.extend(ReceivedEnvelope::from_envelopes(&envelopes));
    }
    // All three are single envelopes under the same seed and sequence 0.
    let options = EvalOptions { perplexity: true, jsd: true };
    let report = evaluate(&all, &config, &corpus, &*provider, options).unwrap();
    let words: usize = all.iter().map(|e| count_words(&e.text)).sum();
    let bits: usize = all
        .iter()
        .map(|e| {
            let tokens = provider.tokenize(&e.text).unwrap();
            let ctx = select_context(&corpus.sentences, "reviews", 3, config.embed.context_size).unwrap();
            let frame = extract(&tokens, &*provider, &ctx, &config.embed).unwrap();
            HEADER_BITS + unframe_payload(&frame).unwrap().body.len()
        })
        .sum();
    assert_eq!(report.bpw.total_bits, bits);
    assert_eq!(report.bpw.total_words, words);
    assert_eq!(report.bpw.bpw, bits as f64 / words as f64);
    assert!(report.perplexity.unwrap() >= 1.0);
    let jsd = report.jsd.as_ref().unwrap();
    assert!(jsd.jsd > 0.0 && jsd.jsd <= 1.0);
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["bpw"]["total_bits"], bits);
    assert!(report.to_tsv().starts_with("envelopes\t3\n"));
}
