//! `reasoning-circuits`: validate annotations, build training mixtures, run
//! the circuit over a dataset, score predictions and export rating sheets.
//!
//! Exit codes: 0 success, 1 domain failure, 2 usage or IO error.

mod config;
mod run;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use reasoning_circuits::annotation::{
    parse_annotation_file, parse_annotations_unchecked, parse_dataset_file, validate_annotation, DataError,
};
use reasoning_circuits::backends::{
    scripted_from_annotations, Backend, HttpBackend, HttpConfig, MissPolicy, RecordedCall, Recording, ScriptedBackend,
};
use reasoning_circuits::metrics::sheet::{export_human_eval_sheet, SheetError, SheetItem};
use reasoning_circuits::metrics::{evaluate_run, read_predictions, MetricError};
use reasoning_circuits::mixture::{
    expand_all, format_stats, mixture_stats, sample_kshot, training_jsonl, KShot, MixtureMetadata, MixtureSpec,
};
use reasoning_circuits::{ConfusedPolicy, ContextMode, Report, RunConfig, SentinelConfig, ValidatorMode, VERSION};
use serde::Serialize;

use config::{pick, require, FileConfig};
use run::{predictions_jsonl, run_all, trace_path, Prediction};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Domain(String),
}

impl CliError {
    fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Invalid(_) => CliError::Domain(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "reasoning-circuits",
    version,
    about = "Multi-hop question generation with reasoning circuits"
)]
struct Cli {
    /// Config file of key = value lines; defaults to $REASONING_CIRCUITS_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check annotation files and report every violation.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Sample a k-shot split and write the task mixture.
    Mixture(MixtureArgs),
    /// Run the circuit over a dataset.
    Run(Box<RunArgs>),
    /// Score a predictions file.
    Eval {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample generated questions into a human rating sheet.
    Sheet {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(short = 'n')]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MixtureArgs {
    /// Annotation files holding both the train and dev pools.
    #[arg(long)]
    pool: Vec<PathBuf>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// full | supporting
    #[arg(long)]
    context: Option<String>,
    /// Add one single-step baseline record per example.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// scripted | http
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    /// Annotations answering every step (scripted backend).
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Recorded calls to replay (scripted backend).
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Write every backend call here for later replay.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    context: Option<String>,
    /// both | bridge_only | comparison_only
    #[arg(long)]
    confused_policy: Option<String>,
    /// warn | reject
    #[arg(long)]
    validator_mode: Option<String>,
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_new_tokens: Option<usize>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    retries: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = FileConfig::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Validate { files } => validate(&files),
        Command::Mixture(a) => mixture(a, file),
        Command::Run(a) => run_cmd(*a, file),
        Command::Eval { pred, out } => eval(pred, out, file),
        Command::Sheet { pred, n, seed, out } => sheet(pred, n, seed, out, file),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn parse_context(s: &str) -> Result<ContextMode, CliError> {
    match s {
        "full" => Ok(ContextMode::Full),
        "supporting" => Ok(ContextMode::Supporting),
        other => Err(CliError::Usage(format!(
            "unknown context mode '{other}' (expected full|supporting)"
        ))),
    }
}

fn write(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `out.jsonl` -> `out.<suffix>`, next to the original.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes") + "\n"
}

fn validate(files: &[PathBuf]) -> CliResult {
    let mut total = 0;
    let mut bad = 0;
    for path in files {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let records =
            parse_annotations_unchecked(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        for a in &records {
            let report = validate_annotation(a);
            if !report.violations.is_empty() {
                println!("{report}");
            }
            bad += usize::from(!report.is_valid());
        }
        total += records.len();
    }
    if bad > 0 {
        return Err(CliError::Domain(format!("{bad} of {total} records failed validation")));
    }
    println!("{total} records OK");
    Ok(())
}

fn mixture(a: MixtureArgs, file: FileConfig) -> CliResult {
    let pool_files = if a.pool.is_empty() {
        file.pool.unwrap_or_default()
    } else {
        a.pool
    };
    if pool_files.is_empty() {
        return Err(CliError::Usage("--pool is required (flag or config key 'pool')".into()));
    }
    let spec = MixtureSpec {
        k_train: require(a.shots, file.shots, "shots")?,
        seed: pick(a.seed, file.seed, 0),
        context_mode: parse_context(&pick(a.context, file.context, "full".into()))?,
        include_baseline: a.baseline || file.baseline.unwrap_or(false),
    };
    let out = require(a.out, file.out, "out")?;
    eprintln!("seed: {}", spec.seed);

    let mut pool = Vec::new();
    for p in &pool_files {
        pool.extend(parse_annotation_file(p)?);
    }
    let kshot = sample_kshot(&pool, &spec).map_err(|e| CliError::Domain(e.to_string()))?;
    let s = SentinelConfig::default();
    let expand = |list| {
        expand_all(list, spec.context_mode, &s, spec.include_baseline).map_err(|e| CliError::Domain(e.to_string()))
    };
    let train = expand(&kshot.train)?;
    let val = expand(&kshot.val)?;

    write(&out, &training_jsonl(&train))?;
    write(&sibling(&out, "val.jsonl"), &training_jsonl(&val))?;
    write(
        &sibling(&out, "meta.json"),
        &pretty(&MixtureMetadata::new(&spec, &kshot, train.len(), val.len())),
    )?;

    let (tc, vc) = (KShot::counts(&kshot.train), KShot::counts(&kshot.val));
    println!("train examples: {} bridge + {} comparison", tc.bridge, tc.comparison);
    println!("val examples:   {} bridge + {} comparison", vc.bridge, vc.comparison);
    print!("{}", format_stats(&mixture_stats(&train)));
    Ok(())
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    version: &'a str,
    backend: &'a str,
    context_mode: ContextMode,
    confused_policy: ConfusedPolicy,
    validator_mode: ValidatorMode,
    max_new_tokens: usize,
    examples: usize,
    failed: usize,
}

fn run_cmd(a: RunArgs, file: FileConfig) -> CliResult {
    let dataset_path = require(a.dataset, file.dataset, "dataset")?;
    let out = require(a.out, file.out, "out")?;
    let traces = require(a.traces, file.traces, "traces")?;
    let kind = pick(a.backend, file.backend, "scripted".into());
    let cfg = RunConfig {
        context_mode: parse_context(&pick(a.context, file.context, "full".into()))?,
        confused_policy: pick(a.confused_policy, file.confused_policy, "both".into())
            .parse()
            .map_err(CliError::Usage)?,
        validator_mode: pick(a.validator_mode, file.validator_mode, "warn".into())
            .parse()
            .map_err(CliError::Usage)?,
        max_new_tokens: pick(
            a.max_new_tokens,
            file.max_new_tokens,
            RunConfig::default().max_new_tokens,
        ),
        sentinels: SentinelConfig::default(),
    };
    if cfg.max_new_tokens == 0 {
        return Err(CliError::Usage("--max-new-tokens must be at least 1".into()));
    }
    let workers = pick(a.workers, file.workers, 4).max(1);

    let mut examples = parse_dataset_file(&dataset_path)?;
    examples.sort_by(|x, y| x.id.cmp(&y.id));
    let mut seen = HashSet::new();
    if let Some(dup) = examples.iter().find(|e| !seen.insert(e.id.as_str())) {
        return Err(CliError::Domain(format!("duplicate example id '{}'", dup.id)));
    }

    let inner: Box<dyn Backend> = match kind.as_str() {
        "scripted" => Box::new(scripted(
            a.annotations.or(file.annotations),
            a.replay.or(file.replay),
            cfg.context_mode,
        )?),
        "http" => {
            let endpoint = require(a.endpoint, file.endpoint, "endpoint")?;
            let mut hc = HttpConfig::new(endpoint).max_in_flight(workers);
            if let Some(ms) = a.timeout_ms.or(file.timeout_ms) {
                hc = hc.timeout(Duration::from_millis(ms));
            }
            if let Some(r) = a.retries.or(file.retries) {
                hc = hc.retries(r);
            }
            Box::new(HttpBackend::new(hc).map_err(|e| CliError::Usage(e.to_string()))?)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown backend '{other}' (expected scripted|http)"
            )))
        }
    };
    let backend = Recording::new(inner);

    let outcome = run_all(&examples, &backend, &cfg, workers);
    std::fs::create_dir_all(&traces).map_err(|e| CliError::io(&traces, e))?;
    for t in &outcome.traces {
        write(&trace_path(&traces, &t.input_id), &t.to_json())?;
    }
    write(&out, &predictions_jsonl(&outcome.predictions))?;
    let meta = RunMetadata {
        version: VERSION,
        backend: &kind,
        context_mode: cfg.context_mode,
        confused_policy: cfg.confused_policy,
        validator_mode: cfg.validator_mode,
        max_new_tokens: cfg.max_new_tokens,
        examples: examples.len(),
        failed: outcome.failures.len(),
    };
    write(&sibling(&out, "meta.json"), &pretty(&meta))?;
    if let Some(path) = a.record.or(file.record) {
        let mut calls = backend.into_calls();
        calls.sort_by(|x, y| (&x.key, &x.prompt).cmp(&(&y.key, &y.prompt)));
        let text: String = calls
            .iter()
            .map(|c| serde_json::to_string(c).expect("call serializes") + "\n")
            .collect();
        write(&path, &text)?;
    }

    let emitted: usize = outcome.predictions.iter().map(|p| p.hypotheses.len()).sum();
    println!(
        "{} of {} examples completed, {emitted} questions",
        outcome.predictions.len(),
        examples.len()
    );
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for f in &outcome.failures {
        eprintln!("failed: {f}");
    }
    Err(CliError::Domain(format!(
        "{} of {} examples failed",
        outcome.failures.len(),
        examples.len()
    )))
}

fn scripted(
    annotations: Option<PathBuf>,
    replay: Option<PathBuf>,
    mode: ContextMode,
) -> Result<ScriptedBackend, CliError> {
    match (annotations, replay) {
        (Some(path), None) => {
            let pool = parse_annotation_file(&path)?;
            scripted_from_annotations(&pool, mode, &SentinelConfig::default(), MissPolicy::Fail)
                .map_err(|e| CliError::Domain(e.to_string()))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let calls = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| {
                    serde_json::from_str::<RecordedCall>(l)
                        .map_err(|e| CliError::Io(format!("{} line {}: {e}", path.display(), i + 1)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ScriptedBackend::from_recording(&calls, MissPolicy::Fail))
        }
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--annotations and --replay are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "the scripted backend needs --annotations or --replay".into(),
        )),
    }
}

#[derive(Serialize)]
struct EvalOutput {
    version: &'static str,
    #[serde(flatten)]
    report: Report,
}

fn eval(pred: Option<PathBuf>, out: Option<PathBuf>, file: FileConfig) -> CliResult {
    let pred = require(pred, file.pred, "pred")?;
    let out = require(out, file.out, "out")?;
    let pairs = read_predictions(&pred).map_err(|e| CliError::Io(format!("{}: {e}", pred.display())))?;
    let report = evaluate_run(&pairs).map_err(|e| match e {
        MetricError::Empty => CliError::Io(format!("{}: no predictions", pred.display())),
        other => CliError::Domain(other.to_string()),
    })?;
    write(
        &out,
        &pretty(&EvalOutput {
            version: VERSION,
            report,
        }),
    )?;
    println!("n          {}", report.n);
    for (name, v) in ["bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l"]
        .iter()
        .zip(report.metrics())
    {
        println!("{name:<10} {v:.4}");
    }
    println!("selection  {:.4}", report.selection_score);
    Ok(())
}

fn read_prediction_lines(path: &Path) -> Result<Vec<Prediction>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Io(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[derive(Serialize)]
struct SheetMetadata {
    version: &'static str,
    seed: u64,
    n: usize,
    available: usize,
}

fn sheet(
    pred: Option<PathBuf>,
    n: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    file: FileConfig,
) -> CliResult {
    let pred = require(pred, file.pred, "pred")?;
    let out = require(out, file.out, "out")?;
    let n = pick(n, file.n, 150);
    let seed = pick(seed, file.seed, 0);
    eprintln!("seed: {seed}");

    let preds = read_prediction_lines(&pred)?;
    if preds.is_empty() {
        return Err(CliError::Io(format!("{}: no predictions", pred.display())));
    }
    // One row per generated question; confused runs contribute two.
    let mut items = Vec::new();
    for p in &preds {
        for (i, q) in p.hypotheses.iter().enumerate() {
            items.push(SheetItem {
                id: if p.hypotheses.len() > 1 {
                    format!("{}#{}", p.id, i + 1)
                } else {
                    p.id.clone()
                },
                p1: p.p1.clone(),
                p2: p.p2.clone(),
                answer: p.answer.clone(),
                question: q.clone(),
            });
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let rows = export_human_eval_sheet(&items, n, seed, &out).map_err(|e| match e {
        SheetError::TooMany { .. } => CliError::Domain(e.to_string()),
        other => CliError::io(&out, other),
    })?;
    let meta = SheetMetadata {
        version: VERSION,
        seed,
        n: rows,
        available: items.len(),
    };
    write(&sibling(&out, "meta.json"), &pretty(&meta))?;
    println!("{rows} rows written to {}", out.display());
    Ok(())
}
