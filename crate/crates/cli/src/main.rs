use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use lmsteg_core::pipeline::{
    build_provider, evaluate, extract_secret, hide_secret, read_envelopes, write_envelopes,
    EvalOptions, PipelineError, PreparedCorpus, RunConfig, EXIT_CODES,
};
use lmsteg_core::provider::{ENV_ENDPOINT, ENV_TIMEOUT_MS, ENV_TOKEN};
use serde_json::json;

/// Hide text in language-model generations and get it back.
#[derive(Parser, Debug)]
#[command(name = "lmsteg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Config file of `key=value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Prepared corpus directory, or a one-sentence-per-line file.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    #[arg(long, value_name = "toy|remote", global = true)]
    provider: Option<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    tau: Option<f64>,

    #[arg(long, global = true)]
    alpha: Option<f64>,

    #[arg(long, global = true)]
    beta: Option<f64>,

    #[arg(long, global = true)]
    t0: Option<f64>,

    #[arg(long, global = true)]
    delta0: Option<f64>,

    /// Context sentences placed in the prompt.
    #[arg(long, global = true)]
    k: Option<usize>,

    #[arg(long, global = true)]
    max_candidates: Option<usize>,

    #[arg(long, global = true)]
    max_tokens: Option<usize>,

    #[arg(long, value_enum, global = true)]
    format: Option<Format>,

    /// More log output on stderr (-v, -vv).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a text file into sentences and write the corpus artifacts.
    Prepare {
        input: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Hide a secret; writes envelope-NNN.txt and envelope-NNN.meta files.
    Hide {
        /// Secret text; read from --secret-file or stdin when absent.
        secret: Option<String>,
        #[arg(long, conflicts_with = "secret")]
        secret_file: Option<PathBuf>,
        /// Output directory; falls back to the `output` config key.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Recover a secret from envelope files or a directory of them.
    Extract {
        #[arg(required = true)]
        envelopes: Vec<PathBuf>,
        /// Write the secret here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Report bits per word and optional perplexity and JSD.
    Eval {
        #[arg(required = true)]
        envelopes: Vec<PathBuf>,
        #[arg(long)]
        perplexity: bool,
        #[arg(long)]
        jsd: bool,
    },
}

fn exit_help() -> String {
    let mut help = String::from("Exit codes:\n  0  success\n  2  bad command line\n");
    for (kind, code) in EXIT_CODES {
        help.push_str(&format!("  {code:<2} {kind}\n"));
    }
    help.push_str(&format!(
        "\nErrors are printed to stderr as one JSON object.\n\n\
         Remote provider environment: {ENV_ENDPOINT}, {ENV_TOKEN}, {ENV_TIMEOUT_MS}"
    ));
    help
}

fn config(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for pair in &common.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        config.set(key, value)?;
    }
    let flags: [(&str, Option<String>); 11] = [
        ("corpus", common.corpus.as_ref().map(|p| p.display().to_string())),
        ("provider", common.provider.clone()),
        ("seed", common.seed.map(|v| v.to_string())),
        ("tau", common.tau.map(|v| v.to_string())),
        ("alpha", common.alpha.map(|v| v.to_string())),
        ("beta", common.beta.map(|v| v.to_string())),
        ("t0", common.t0.map(|v| v.to_string())),
        ("delta0", common.delta0.map(|v| v.to_string())),
        ("k", common.k.map(|v| v.to_string())),
        ("max_candidates", common.max_candidates.map(|v| v.to_string())),
        ("max_tokens", common.max_tokens.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            config.set(key, &value)?;
        }
    }
    config.validate()?;
    Ok(config)
}

fn load_corpus(config: &RunConfig) -> Result<PreparedCorpus, PipelineError> {
    let path = config
        .corpus
        .as_ref()
        .ok_or_else(|| PipelineError::Config("no corpus given (--corpus or corpus=)".into()))?;
    PreparedCorpus::load(path)
}

fn emit(format: Format, value: serde_json::Value, tsv: String) {
    match format {
        Format::Json => println!("{value}"),
        Format::Tsv => print!("{tsv}"),
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let config = config(&cli.common)?;
    let format = cli.common.format.unwrap_or(Format::Json);
    match cli.command {
        Command::Prepare { input, out } => {
            let text = fs::read_to_string(&input).map_err(|e| PipelineError::io(&input, e))?;
            let corpus = PreparedCorpus::from_text(&text)?;
            corpus.write_to(&out)?;
            let bytes = corpus.table.total();
            emit(
                format,
                json!({
                    "sentences": corpus.sentences.len(),
                    "bytes": bytes,
                    "digest": corpus.digest,
                    "out": out,
                }),
                format!(
                    "sentences\t{}\nbytes\t{bytes}\ndigest\t{}\nout\t{}\n",
                    corpus.sentences.len(),
                    corpus.digest,
                    out.display()
                ),
            );
        }
        Command::Hide { secret, secret_file, out } => {
            let secret = match (secret, secret_file) {
                (Some(s), _) => s,
                (None, Some(path)) => fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?,
                (None, None) => {
                    let mut s = String::new();
                    io::stdin()
                        .read_to_string(&mut s)
                        .map_err(|e| PipelineError::io(Path::new("<stdin>"), e))?;
                    s
                }
            };
            let out = out
                .or_else(|| config.output.clone())
                .ok_or_else(|| PipelineError::Config("no output directory (--out or output=)".into()))?;
            let corpus = load_corpus(&config)?;
            let provider = build_provider(&config, &corpus)?;
            let envelopes = hide_secret(&secret, &config, &corpus, &*provider)?;
            let files = write_envelopes(&out, &envelopes)?;
            let rows: Vec<_> = envelopes
                .iter()
                .zip(&files)
                .enumerate()
                .map(|(i, (e, f))| {
                    json!({"sequence": i, "file": f, "bits": e.bits_consumed, "tokens": e.tokens.len()})
                })
                .collect();
            let tsv: String = envelopes
                .iter()
                .zip(&files)
                .enumerate()
                .map(|(i, (e, f))| format!("{i}\t{}\t{}\t{}\n", f.display(), e.bits_consumed, e.tokens.len()))
                .collect();
            emit(format, json!({"envelopes": rows}), tsv);
        }
        Command::Extract { envelopes, out } => {
            let corpus = load_corpus(&config)?;
            let provider = build_provider(&config, &corpus)?;
            let received = read_envelopes(&envelopes)?;
            let secret = extract_secret(&received, &config, &corpus, &*provider)?;
            match out {
                Some(path) => fs::write(&path, &secret).map_err(|e| PipelineError::io(&path, e))?,
                None if cli.common.format == Some(Format::Json) => println!("{}", json!({"secret": secret})),
                None => {
                    let mut stdout = io::stdout();
                    stdout
                        .write_all(secret.as_bytes())
                        .and_then(|_| stdout.flush())
                        .map_err(|e| PipelineError::io(Path::new("<stdout>"), e))?;
                }
            }
        }
        Command::Eval { envelopes, perplexity, jsd } => {
            let corpus = load_corpus(&config)?;
            let provider = build_provider(&config, &corpus)?;
            let received = read_envelopes(&envelopes)?;
            let report = evaluate(&received, &config, &corpus, &*provider, EvalOptions { perplexity, jsd })?;
            let value = serde_json::to_value(&report).expect("report serializes");
            emit(format, value, report.to_tsv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(exit_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let error = json!({
                "error": {
                    "kind": e.kind(),
                    "message": e.to_string(),
                    "envelope": e.envelope_index(),
                    "exit_code": e.exit_code(),
                }
            });
            eprintln!("{error}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
