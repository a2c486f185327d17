use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use lmsteg_core::metrics::count_words;
use serde_json::Value;

fn reviews() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/reviews.txt")
}

fn lmsteg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmsteg"))
        .current_dir(dir)
        .env_remove("STEGO_LLM_ENDPOINT")
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_of(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr)
        .lines()
        .last()
        .unwrap_or_default()
        .to_string();
    serde_json::from_str::<Value>(&line).unwrap()["error"].clone()
}

fn prepared(dir: &Path) {
    ok(lmsteg(dir, &["prepare", reviews().to_str().unwrap(), "--out", "corpus"]));
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_documents_every_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let help = String::from_utf8(ok(lmsteg(dir.path(), &["--help"])).stdout).unwrap();
    for (kind, code) in lmsteg_core::pipeline::EXIT_CODES {
        assert!(help.contains(&format!("{code:<2} {kind}")), "{kind} missing from help");
    }
    for sub in ["prepare", "hide", "extract", "eval"] {
        assert!(help.contains(sub));
    }
}

#[test]
fn prepare_splits_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.txt"), "Hi. Bye.").unwrap();
    let out = json(&ok(lmsteg(dir.path(), &["prepare", "tiny.txt", "-o", "tiny"])));
    assert_eq!(out["sentences"], 2);
    assert_eq!(fs::read_to_string(dir.path().join("tiny/sentences.txt")).unwrap(), "Hi.\nBye.\n");

    let first = json(&ok(lmsteg(dir.path(), &["prepare", reviews().to_str().unwrap(), "-o", "a"])));
    let second = json(&ok(lmsteg(dir.path(), &["prepare", reviews().to_str().unwrap(), "-o", "b"])));
    assert_eq!(first["digest"], second["digest"]);
    assert!(first["sentences"].as_u64().unwrap() >= 100);
    assert!(first["bytes"].as_u64().unwrap() >= first["sentences"].as_u64().unwrap());
    assert_eq!(tree(&dir.path().join("a")), tree(&dir.path().join("b")));
}

#[test]
fn hide_extract_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let secrets = ["x", "meet at noon", "naïve café, 3 € only", "line one\nline two\n"];
    for (i, secret) in secrets.iter().enumerate() {
        let seed = (100 + i).to_string();
        let out = format!("env{i}");
        ok(lmsteg(dir.path(), &["hide", secret, "--corpus", "corpus", "--seed", &seed, "-o", &out]));
        let back = ok(lmsteg(dir.path(), &["extract", &out, "--corpus", "corpus", "--seed", &seed]));
        assert_eq!(String::from_utf8(back.stdout).unwrap(), *secret);
    }
}

#[test]
fn hide_reads_stdin_and_json_extract() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let mut child = Command::new(env!("CARGO_BIN_EXE_lmsteg"))
        .current_dir(dir.path())
        .args(["hide", "--corpus", "corpus", "-o", "env"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"from stdin").unwrap();
    assert!(child.wait_with_output().unwrap().status.success());
    let out = ok(lmsteg(dir.path(), &["extract", "env", "--corpus", "corpus", "--format", "json"]));
    assert_eq!(json(&out)["secret"], "from stdin");
}

#[test]
fn two_runs_produce_identical_artifacts() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        prepared(dir.path());
        let hide = ok(lmsteg(dir.path(), &["hide", "same every time", "--corpus", "corpus", "--seed", "9", "-o", "env"]));
        let extract = ok(lmsteg(dir.path(), &["extract", "env", "--corpus", "corpus", "--seed", "9", "-o", "secret.txt"]));
        (tree(dir.path()), hide.stdout, extract.stdout)
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a.0.iter().any(|(p, bytes)| p == Path::new("secret.txt") && bytes == b"same every time"));
}

#[test]
fn empty_secret_gives_one_envelope_and_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let out = json(&ok(lmsteg(dir.path(), &["hide", "", "--corpus", "corpus", "-o", "env"])));
    let envelopes = out["envelopes"].as_array().unwrap();
    assert_eq!(envelopes.len(), 1);
    assert_eq!(envelopes[0]["bits"], 56);
    let back = ok(lmsteg(dir.path(), &["extract", "env", "--corpus", "corpus"]));
    assert!(back.stdout.is_empty());
}

#[test]
fn long_secret_chains_and_missing_link_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let secret = "an oversized secret that will never fit into thirty two tokens of one envelope";
    let args = ["--corpus", "corpus", "--max-tokens", "32", "--seed", "4"];
    let out = json(&ok(lmsteg(dir.path(), &[&["hide", secret, "-o", "env"][..], &args].concat())));
    let count = out["envelopes"].as_array().unwrap().len();
    assert!(count >= 2, "{count} envelopes");
    assert!(out["envelopes"].as_array().unwrap().iter().all(|e| e["tokens"].as_u64().unwrap() <= 32));
    let back = ok(lmsteg(dir.path(), &[&["extract", "env"][..], &args].concat()));
    assert_eq!(String::from_utf8(back.stdout).unwrap(), secret);

    fs::remove_file(dir.path().join("env/envelope-001.txt")).unwrap();
    let broken = lmsteg(dir.path(), &[&["extract", "env"][..], &args].concat());
    assert_eq!(broken.status.code(), Some(13));
    assert_eq!(error_of(&broken)["kind"], "chain");
}

#[test]
fn mismatched_seed_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    ok(lmsteg(dir.path(), &["hide", "attack at dawn", "--corpus", "corpus", "--seed", "1", "-o", "env"]));
    let out = lmsteg(dir.path(), &["extract", "env", "--corpus", "corpus", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(8));
    let error = error_of(&out);
    assert_eq!(error["kind"], "token-not-in-pool");
    assert_eq!(error["envelope"], 0);
    assert_eq!(error["exit_code"], 8);
    assert!(out.stdout.is_empty());
}

#[test]
fn eval_json_matches_hide_report() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let hidden = json(&ok(lmsteg(dir.path(), &["hide", "count my words", "--corpus", "corpus", "-o", "env"])));
    let bits = hidden["envelopes"][0]["bits"].as_u64().unwrap();
    let text = fs::read_to_string(dir.path().join("env/envelope-000.txt")).unwrap();
    let words = count_words(&text) as u64;

    let report = json(&ok(lmsteg(
        dir.path(),
        &["eval", "env", "--corpus", "corpus", "--perplexity", "--jsd", "--format", "json"],
    )));
    assert_eq!(report["bpw"]["total_bits"], bits);
    assert_eq!(report["bpw"]["total_words"], words);
    assert_eq!(report["bpw"]["bpw"].as_f64().unwrap(), bits as f64 / words as f64);
    assert!(report["perplexity"].as_f64().unwrap() >= 1.0);
    assert!(report["jsd"]["jsd"].as_f64().is_some());

    let tsv = ok(lmsteg(dir.path(), &["eval", "env", "--corpus", "corpus", "--format", "tsv"]));
    let tsv = String::from_utf8(tsv.stdout).unwrap();
    assert!(tsv.contains(&format!("total_bits\t{bits}\n")));
    assert!(!tsv.contains("perplexity"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    fs::write(
        dir.path().join("run.conf"),
        "# shared between both ends\ncorpus=corpus\nseed=77\noutput=env\ntau=0.005\n",
    )
    .unwrap();
    ok(lmsteg(dir.path(), &["hide", "configured", "--config", "run.conf"]));
    let meta = fs::read_to_string(dir.path().join("env/envelope-000.meta")).unwrap();
    assert!(meta.contains("seed=77\n"));
    let back = ok(lmsteg(dir.path(), &["extract", "env", "--config", "run.conf"]));
    assert_eq!(back.stdout, b"configured");

    // A flag beats --set, which beats the file.
    let wrong = lmsteg(dir.path(), &["extract", "env", "--config", "run.conf", "--set", "seed=78"]);
    assert_eq!(wrong.status.code(), Some(8));
    let fixed = lmsteg(dir.path(), &["extract", "env", "--config", "run.conf", "--set", "seed=78", "--seed", "77"]);
    assert_eq!(ok(fixed).stdout, b"configured");
}

#[test]
fn errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let unknown = lmsteg(dir.path(), &["hide", "x", "--set", "colour=blue", "-o", "e"]);
    assert_eq!(unknown.status.code(), Some(3));
    assert_eq!(error_of(&unknown)["kind"], "config");

    let remote = lmsteg(dir.path(), &["hide", "x", "--corpus", "corpus", "--provider", "remote", "-o", "e"]);
    assert_eq!(remote.status.code(), Some(3));

    let missing = lmsteg(dir.path(), &["extract", "nowhere", "--corpus", "corpus"]);
    assert_eq!(missing.status.code(), Some(4));

    fs::write(dir.path().join("blank.txt"), "   \n\n").unwrap();
    let empty = lmsteg(dir.path(), &["prepare", "blank.txt", "-o", "blank"]);
    assert_eq!(empty.status.code(), Some(5));

    let bad_tau = lmsteg(dir.path(), &["hide", "x", "--corpus", "corpus", "--tau", "2", "-o", "e"]);
    assert_eq!(bad_tau.status.code(), Some(3));

    assert_eq!(lmsteg(dir.path(), &["hide", "x", "--format", "xml"]).status.code(), Some(2));
}
