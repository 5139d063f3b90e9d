mod manifest;

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use uiddec::eval::{sweep_aggregate, SweepBucket, SweepRow};
use uiddec::model::train_ngram;
use uiddec::objectives::{Objective, Penalty, RegularizerKind};
use uiddec::search::{beam_search, brute_force, exact_search, greedy_search, DecodeRecord, SearchConfig};
use uiddec::surprisal::{stats, SurprisalStats};
use uiddec::verify::{run_suite, Suite};
use uiddec::{SequenceModel, TokenId};

use manifest::{sha256_hex, RunManifest};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "uiddec", version, about = "Decode sequence models under surprisal-regularized objectives")]
struct Cli {
    /// Worker threads for per-sentence decoding (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an add-k smoothed n-gram model from a whitespace-tokenized corpus.
    TrainNgram {
        corpus: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 1.0)]
        add_k: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Decode every line of an input file and write one JSON record per line.
    Decode {
        model: PathBuf,
        input: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Comma-separated `kind=λ` pairs plus an optional `len=reward:λ` or `len=norm`.
        #[arg(long, default_value = "")]
        objective: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Decode over a grid of regularizer weights and beam widths and write a CSV summary.
    Sweep {
        model: PathBuf,
        input: PathBuf,
        refs: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, value_parser = parse_kind, default_value = "greedy")]
        objective_kind: RegularizerKind,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        lambdas: Vec<f64>,
        /// Beam widths to sweep; defaults to `--k`.
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run a seeded verification suite against the exhaustive oracles.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long, env = "UIDDECODE_SEED", default_value_t = 7)]
        seed: u64,
        /// Number of random trials; defaults to the suite's own count.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(clap::Args, Clone)]
struct SearchArgs {
    #[arg(long, value_enum, default_value_t = Decoder::Beam)]
    decoder: Decoder,
    /// Beam width (beam decoder only).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 50)]
    n_max: usize,
    /// Disable empty-string pruning in exact search.
    #[arg(long)]
    no_pruning: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Decoder {
    Greedy,
    Beam,
    Exact,
    Brute,
}

impl Decoder {
    fn name(self) -> &'static str {
        match self {
            Decoder::Greedy => "greedy",
            Decoder::Beam => "beam",
            Decoder::Exact => "exact",
            Decoder::Brute => "brute",
        }
    }
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        let default_k = SearchConfig::default().beam_width;
        if self.k.is_some() && self.decoder != Decoder::Beam {
            warn!("--k is ignored by the {} decoder", self.decoder.name());
        }
        SearchConfig::new(self.k.unwrap_or(default_k), self.n_max).with_pruning(!self.no_pruning)
    }
}

fn parse_kind(s: &str) -> std::result::Result<RegularizerKind, String> {
    s.parse().map_err(|e: uiddec::Error| e.to_string())
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: uiddec::Error| e.to_string())
}

/// Bad arguments or inputs that do not fit together.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<uiddec::Error>() {
            return match e {
                uiddec::Error::Io(_) | uiddec::Error::Json(_) | uiddec::Error::Parse(_) | uiddec::Error::Distribution(_) => {
                    EXIT_IO
                }
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::TrainNgram { corpus, order, add_k, out } => cmd_train_ngram(&corpus, order, add_k, &out),
        Command::Decode { model, input, search, objective, out } => cmd_decode(&model, &input, &search, &objective, &out),
        Command::Sweep { model, input, refs, search, objective_kind, lambdas, ks, out } => {
            cmd_sweep(&model, &input, &refs, &search, objective_kind, &lambdas, &ks, &out)
        }
        Command::Verify { suite, seed, trials, report } => cmd_verify(suite, seed, trials, report.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<(String, String)> {
    let bytes = read(path)?;
    let digest = sha256_hex(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    Ok((text, digest))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn cmd_train_ngram(corpus: &Path, order: usize, add_k: f64, out: &Path) -> Result<ExitCode> {
    let (text, digest) = read_text(corpus)?;
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    let model = train_ngram(&lines, order, add_k)?;
    let mut body = serde_json::to_string_pretty(&model.to_file()?)?;
    body.push('\n');
    write_file(out, body.as_bytes())?;

    let mut manifest = RunManifest::new("train-ngram", json!({ "order": order, "add_k": add_k }));
    manifest.input_digest = Some(digest);
    manifest.write_beside(out)?;
    info!("trained order-{order} model on {} lines", lines.len());
    Ok(ExitCode::SUCCESS)
}

struct Loaded {
    model: Box<dyn SequenceModel>,
    model_digest: String,
    sources: Vec<(String, Vec<TokenId>)>,
    input_digest: String,
}

fn load_inputs(model_path: &Path, input_path: &Path) -> Result<Loaded> {
    let model_bytes = read(model_path)?;
    let model_digest = sha256_hex(&model_bytes);
    let model_text = String::from_utf8(model_bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let model = uiddec::model::model_from_json(&model_text)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let (input, input_digest) = read_text(input_path)?;
    let sources = input
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let ids = model.vocab().encode_line(line).with_context(|| format!("input line {}", i + 1))?;
            Ok((line.trim().to_string(), ids))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Loaded { model, model_digest, sources, input_digest })
}

fn run_decoder(
    model: &dyn SequenceModel,
    source: &[TokenId],
    decoder: Decoder,
    objective: &Objective,
    config: &SearchConfig,
) -> uiddec::Result<DecodeRecord> {
    match decoder {
        Decoder::Greedy => {
            let mut record = greedy_search(model, source, config)?;
            record.best.rescore(objective)?;
            Ok(record)
        }
        Decoder::Beam => beam_search(model, source, objective, config),
        Decoder::Exact => exact_search(model, source, objective, config),
        Decoder::Brute => brute_force(model, source, objective, config.n_max),
    }
}

/// Decodes all sources concurrently; results keep input order.
fn decode_all(
    loaded: &Loaded,
    decoder: Decoder,
    objective: &Objective,
    config: &SearchConfig,
) -> Result<Vec<DecodeRecord>> {
    loaded
        .sources
        .par_iter()
        .enumerate()
        .map(|(i, (_, src))| {
            run_decoder(loaded.model.as_ref(), src, decoder, objective, config)
                .with_context(|| format!("decoding input line {}", i + 1))
        })
        .collect()
}

#[derive(Serialize)]
struct BeamMember {
    output: String,
    log_prob: f64,
    total: f64,
}

#[derive(Serialize)]
struct DecodeLine<'a> {
    index: usize,
    source: &'a str,
    output: String,
    tokens: Vec<String>,
    log_prob: f64,
    surprisals: &'a [f64],
    penalties: &'a [Penalty],
    length_term: f64,
    total: f64,
    stats: SurprisalStats,
    anchored_sigma: f64,
    decoder: Decoder,
    nodes_expanded: usize,
    optimality_certificate: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    beam: Vec<BeamMember>,
}

fn render(model: &dyn SequenceModel, tokens: &[TokenId]) -> Vec<String> {
    tokens.iter().map(|&t| model.vocab().token(t).unwrap_or("?").to_string()).collect()
}

fn cmd_decode(model_path: &Path, input_path: &Path, search: &SearchArgs, spec: &str, out: &Path) -> Result<ExitCode> {
    let objective = Objective::parse(spec)?;
    let config = search.config();
    let loaded = load_inputs(model_path, input_path)?;
    let records = decode_all(&loaded, search.decoder, &objective, &config)?;

    let model = loaded.model.as_ref();
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    for (index, (record, (source, _))) in records.iter().zip(&loaded.sources).enumerate() {
        let best = &record.best;
        let line = DecodeLine {
            index,
            source,
            output: model.vocab().words(&best.tokens).join(" "),
            tokens: render(model, &best.tokens),
            log_prob: best.log_prob,
            surprisals: best.trace.values(),
            penalties: &best.score.penalties,
            length_term: best.score.length_term,
            total: best.score.total,
            stats: stats(&best.trace)?,
            anchored_sigma: best.trace.anchored_sigma(),
            decoder: search.decoder,
            nodes_expanded: record.nodes_expanded,
            optimality_certificate: record.optimality_certificate,
            beam: record
                .beam_set
                .iter()
                .map(|h| BeamMember {
                    output: model.vocab().words(&h.tokens).join(" "),
                    log_prob: h.log_prob,
                    total: h.score.total,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", out.display()))?;

    let mut manifest = RunManifest::new(
        "decode",
        json!({
            "decoder": search.decoder,
            "objective": objective.to_string(),
            "search": config,
        }),
    );
    manifest.model_digest = Some(loaded.model_digest);
    manifest.input_digest = Some(loaded.input_digest);
    manifest.write_beside(out)?;
    info!("decoded {} lines", records.len());
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    model_path: &Path,
    input_path: &Path,
    refs_path: &Path,
    search: &SearchArgs,
    kind: RegularizerKind,
    lambdas: &[f64],
    ks: &[usize],
    out: &Path,
) -> Result<ExitCode> {
    if lambdas.is_empty() {
        return Err(Usage("--lambdas must list at least one weight".into()).into());
    }
    let base = search.config();
    let ks: Vec<usize> = if ks.is_empty() { vec![base.beam_width] } else { ks.to_vec() };
    let loaded = load_inputs(model_path, input_path)?;
    let (refs_text, refs_digest) = read_text(refs_path)?;
    let references: Vec<Vec<&str>> = refs_text.lines().map(|l| l.split_whitespace().collect()).collect();
    if references.len() != loaded.sources.len() {
        return Err(Usage(format!(
            "{} references for {} inputs",
            references.len(),
            loaded.sources.len()
        ))
        .into());
    }

    let mut buckets = Vec::new();
    for &lambda in lambdas {
        let objective = Objective::single(kind, lambda)?;
        for &k in &ks {
            let config = SearchConfig { beam_width: k, ..base.clone() };
            let records = decode_all(&loaded, search.decoder, &objective, &config)?;
            buckets.push(SweepBucket { lambda, k, outputs: records.into_iter().map(|r| r.best).collect() });
        }
    }
    let rows = sweep_aggregate(&buckets, &references, loaded.model.vocab())?;
    write_file(out, sweep_csv(&rows).as_bytes())?;

    let mut manifest = RunManifest::new(
        "sweep",
        json!({
            "decoder": search.decoder,
            "objective_kind": kind,
            "lambdas": lambdas,
            "ks": ks,
            "search": base,
        }),
    );
    manifest.model_digest = Some(loaded.model_digest);
    manifest.input_digest = Some(loaded.input_digest);
    manifest.references_digest = Some(refs_digest);
    manifest.write_beside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda,k,bleu,mean_sigma,mean_len,empty_rate\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{},{}\n", r.lambda, r.k, r.bleu, r.mean_sigma, r.mean_len, r.empty_rate));
    }
    s
}

fn cmd_verify(suite: Suite, seed: u64, trials: Option<usize>, report_path: Option<&Path>) -> Result<ExitCode> {
    let report = run_suite(suite, seed, trials)?;
    println!("suite {} (seed {seed}, {} trials)", report.suite, report.trials);
    for c in &report.checks {
        let tag = if c.passed == c.total { "ok" } else { "FAILED" };
        println!("  {}: {}/{} {tag}", c.name, c.passed, c.total);
    }
    if report.rejected_draws > 0 {
        println!("  resampled draws: {}", report.rejected_draws);
    }
    for f in &report.failures {
        println!("  failure: {f}");
    }
    if let Some(path) = report_path {
        write_file(path, report.to_json()?.as_bytes())?;
        let mut manifest = RunManifest::new("verify", json!({ "suite": suite, "trials": report.trials }));
        manifest.seed = Some(seed);
        manifest.write_beside(path)?;
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VERIFY_FAILED) })
}
