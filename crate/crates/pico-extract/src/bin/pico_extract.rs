//! Command-line front end: fetch abstracts, preprocess, train, decode,
//! evaluate, and generate synthetic corpora. Settings come from an optional
//! TOML configuration file; command-line flags win over the file.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use pico_extract::corpus::{read_corpus_file, write_corpus_file, Abstract};
use pico_extract::eval::synth::{generate, SynthConfig};
use pico_extract::eval::{cross_validate, EvalReport};
use pico_extract::inference::DecodeMode;
use pico_extract::ingest::{
    build_query, fetch, to_document, FetchConfig, FixtureTransport, HttpTransport, SearchStrategy,
    Transport,
};
use pico_extract::maxent::{load_model_file, save_model_file, TrainConfig};
use pico_extract::pipeline::{
    evaluate_split, evidence_row, predict_all, render_table, train_model, EvidenceRow,
};
use pico_extract::preprocess::Preprocessor;

#[derive(Parser)]
#[command(name = "pico-extract", version, about = "Evidence-table extraction from trial abstracts")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log level: error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch abstracts from the literature API into a corpus file.
    Ingest(IngestArgs),
    /// Tokenize and annotate a corpus; prints per-document statistics.
    Preprocess(PreprocessArgs),
    /// Train the token classifier on an annotated corpus.
    Train(TrainArgs),
    /// Decode a corpus with a trained model and emit an evidence table.
    Predict(PredictArgs),
    /// Cross-validated or holdout comparison of the three decoders.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic annotated corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// glaucoma | prescription-drugs | surgical-interventions
    #[arg(long)]
    strategy: SearchStrategy,
    #[arg(long)]
    out: PathBuf,
    /// Keep only these record ids (one per line).
    #[arg(long)]
    include_ids: Option<PathBuf>,
    /// Directory of recorded responses instead of the live API.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    page_size: Option<usize>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    /// Write the tokenized abstracts as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// zero | vanilla | full
    #[arg(long)]
    mode: Option<DecodeMode>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// tsv | csv
    #[arg(long)]
    format: Option<String>,
    /// Worker threads; 0 means one per core.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// cv | holdout
    #[arg(long, default_value = "cv")]
    method: String,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Test fraction for holdout evaluation.
    #[arg(long, default_value_t = 0.2)]
    holdout_fraction: f64,
    #[arg(long)]
    l2: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Expected distractor sentences per abstract.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    unstructured: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// On-disk configuration, all sections optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    predict: PredictSection,
    #[serde(default)]
    ingest: IngestSection,
    #[serde(default)]
    evaluate: EvaluateSection,
    #[serde(default)]
    synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    l2: Option<f64>,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictSection {
    mode: Option<String>,
    format: Option<String>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestSection {
    base_url: Option<String>,
    page_size: Option<usize>,
    api_key: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateSection {
    k: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthSection {
    n: Option<usize>,
    seed: Option<u64>,
    noise: Option<f64>,
    unstructured: Option<f64>,
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig, String> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", p.display()))
        }
    }
}

fn train_config(args_l2: Option<f64>, max_it: Option<usize>, tol: Option<f64>, file: &TrainSection) -> TrainConfig {
    let base = TrainConfig::default();
    TrainConfig {
        l2: args_l2.or(file.l2).unwrap_or(base.l2),
        max_iterations: max_it.or(file.max_iterations).unwrap_or(base.max_iterations),
        tolerance: tol.or(file.tolerance).unwrap_or(base.tolerance),
        ..base
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .target(env_logger::Target::Stderr)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), String> {
    let file = load_config(cli.config.as_ref())?;
    match &cli.command {
        Command::Ingest(a) => run_ingest(a, &file.ingest),
        Command::Preprocess(a) => run_preprocess(a),
        Command::Train(a) => run_train(a, &file.train),
        Command::Predict(a) => run_predict(a, &file.predict),
        Command::Evaluate(a) => run_evaluate(a, &file),
        Command::Synth(a) => run_synth(a, &file.synth),
    }
}

fn run_ingest(args: &IngestArgs, section: &IngestSection) -> Result<(), String> {
    let mut config = FetchConfig::default();
    if let Some(b) = std::env::var("PICO_EXTRACT_API_BASE").ok().filter(|s| !s.is_empty()) {
        config.base_url = b;
    }
    if let Some(b) = section.base_url.clone() {
        config.base_url = b;
    }
    if let Some(b) = args.base_url.clone() {
        config.base_url = b;
    }
    config.api_key = std::env::var("PICO_EXTRACT_API_KEY").ok().or_else(|| section.api_key.clone());
    if let Some(p) = args.page_size.or(section.page_size) {
        config.page_size = p;
    }

    let transport: Box<dyn Transport> = match &args.fixtures {
        Some(dir) => Box::new(FixtureTransport::from_dir(dir).map_err(|e| e.to_string())?),
        None => Box::new(HttpTransport::new(350)),
    };
    let query = build_query(args.strategy);
    log::info!("query: {query}");
    let records = fetch(query, &config, transport.as_ref()).map_err(|e| e.to_string())?;
    log::info!("fetched {} records", records.len());

    let allow: Option<std::collections::BTreeSet<String>> = match &args.include_ids {
        None => None,
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read {}: {e}", p.display()))?
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect(),
        ),
    };

    let mut docs = Vec::new();
    for rec in &records {
        if let Some(allow) = &allow {
            if !allow.contains(&rec.id) {
                continue;
            }
        }
        match to_document(rec) {
            Ok(d) => docs.push(d),
            Err(e) => log::warn!("skipping record: {e}"),
        }
    }
    write_corpus_file(&args.out, &docs).map_err(|e| e.to_string())?;
    println!("wrote {} documents to {}", docs.len(), args.out.display());
    Ok(())
}

fn run_preprocess(args: &PreprocessArgs) -> Result<(), String> {
    let docs = read_corpus_file(&args.input).map_err(|e| e.to_string())?;
    let pre = Preprocessor::with_builtin();
    let abstracts: Vec<Abstract> = docs.iter().map(|d| pre.run(d)).collect();
    for a in &abstracts {
        println!(
            "{}: {} tokens, {} sentences, structured={}",
            a.id,
            a.tokens.len(),
            a.tokens.last().map(|t| t.sentence_index + 1).unwrap_or(0),
            a.structured
        );
    }
    if let Some(out) = &args.out {
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(out).map_err(|e| e.to_string())?,
        );
        for a in &abstracts {
            let line = serde_json::to_string(a).map_err(|e| e.to_string())?;
            writeln!(w, "{line}").map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

fn run_train(args: &TrainArgs, section: &TrainSection) -> Result<(), String> {
    let docs = read_corpus_file(&args.corpus).map_err(|e| e.to_string())?;
    let config = train_config(args.l2, args.max_iterations, args.tolerance, section);
    let pre = Preprocessor::with_builtin();
    let model = train_model(&docs, &pre, &config).map_err(|e| e.to_string())?;
    save_model_file(&args.model_out, &model).map_err(|e| e.to_string())?;
    println!(
        "trained on {} documents, {} features -> {}",
        docs.len(),
        model.num_features(),
        args.model_out.display()
    );
    Ok(())
}

fn run_predict(args: &PredictArgs, section: &PredictSection) -> Result<(), String> {
    let mode: DecodeMode = match &args.mode {
        Some(m) => *m,
        None => section.mode.as_deref().unwrap_or("full").parse()?,
    };
    let format = args
        .format
        .clone()
        .or_else(|| section.format.clone())
        .unwrap_or_else(|| "tsv".into());
    let sep = match format.as_str() {
        "tsv" => '\t',
        "csv" => ',',
        other => return Err(format!("unknown format {other:?} (use tsv or csv)")),
    };
    let workers = args.workers.or(section.workers).unwrap_or(0);

    let docs = read_corpus_file(&args.corpus).map_err(|e| e.to_string())?;
    let model = load_model_file(&args.model).map_err(|e| e.to_string())?;
    let pre = Preprocessor::with_builtin();
    let abstracts: Vec<Abstract> = docs.iter().map(|d| pre.run(d)).collect();
    let predictions =
        predict_all(&abstracts, &model, mode, workers).map_err(|e| e.to_string())?;
    let rows: Vec<EvidenceRow> = abstracts
        .iter()
        .zip(predictions.iter())
        .map(|(a, p)| evidence_row(a, p))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let table = render_table(&rows, sep);
    match &args.out {
        Some(p) => std::fs::write(p, table).map_err(|e| e.to_string())?,
        None => print!("{table}"),
    }
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs, file: &FileConfig) -> Result<(), String> {
    let docs = read_corpus_file(&args.corpus).map_err(|e| e.to_string())?;
    let k = args.k.or(file.evaluate.k).unwrap_or(5);
    let seed = args.seed.or(file.evaluate.seed).unwrap_or(0);
    let config = train_config(args.l2, None, None, &file.train);
    let pre = Preprocessor::with_builtin();

    let report: EvalReport = match args.method.as_str() {
        "cv" => {
            let mut failure = None;
            let (pooled, _) = cross_validate(docs.len(), k, seed, |train, test| {
                match evaluate_split(&docs, train, test, &pre, &config) {
                    Ok(r) => Ok(r),
                    Err(pico_extract::pipeline::PipelineError::Eval(e)) => Err(e),
                    Err(other) => {
                        failure = Some(other.to_string());
                        Ok(EvalReport::default())
                    }
                }
            })
            .map_err(|e| e.to_string())?;
            if let Some(f) = failure {
                return Err(f);
            }
            pooled
        }
        "holdout" => {
            let n = docs.len();
            let n_test = ((n as f64) * args.holdout_fraction).round().max(1.0) as usize;
            if n_test >= n {
                return Err(format!("holdout fraction {} leaves no training data", args.holdout_fraction));
            }
            // reuse the fold shuffler for a deterministic split
            let folds = pico_extract::eval::kfold_indices(n, n.div_euclid(n_test).max(2), seed)
                .map_err(|e| e.to_string())?;
            let test = folds[0].clone();
            let train: Vec<usize> =
                (0..n).filter(|i| !test.contains(i)).collect();
            let mut r = evaluate_split(&docs, &train, &test, &pre, &config)
                .map_err(|e| e.to_string())?;
            r.folds = None;
            r
        }
        other => return Err(format!("unknown method {other:?} (use cv or holdout)")),
    };
    print!("{}", report.render_text());
    Ok(())
}

fn run_synth(args: &SynthArgs, section: &SynthSection) -> Result<(), String> {
    let base = SynthConfig::default();
    let config = SynthConfig {
        documents: args.n.or(section.n).unwrap_or(base.documents),
        distractor_level: args.noise.or(section.noise).unwrap_or(base.distractor_level),
        unstructured_fraction: args
            .unstructured
            .or(section.unstructured)
            .unwrap_or(base.unstructured_fraction),
    };
    let seed = args.seed.or(section.seed).unwrap_or(0);
    let docs = generate(&config, seed);
    write_corpus_file(&args.out, &docs).map_err(|e| e.to_string())?;
    println!("wrote {} synthetic documents to {}", docs.len(), args.out.display());
    Ok(())
}
