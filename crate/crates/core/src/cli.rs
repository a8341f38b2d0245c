//! Command-line interface. Every subcommand is non-interactive and returns an
//! error (exit status 1) only on documented failure paths; argument errors
//! are reported by clap with status 2.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::backends::{
    wire, CompletionBackend, EmbeddingBackend, HeuristicSummarizer, HttpBackend, HttpConfig, PseudoLabelCache,
    RetryPolicy, StubLabeler, SummarizerBackend, TfIdfEmbedder,
};
use crate::config::{BackendSpec, RunConfig, API_KEY_ENV};
use crate::corpus::{
    import_tweetsumm, load_dataset, subsample_labeled, synthetic, write_canonical, DatasetFormat, DatasetSplit,
    LabeledExample,
};
use crate::heuristics::Heuristic;
use crate::metrics::{evaluate, evaluate_texts, EvalReport, RougeConfig};
use crate::orchestrator::{self, pseudolabel_all, Backends, LabelSettings, RunReport};

#[derive(Debug, Parser)]
#[command(name = "dialsum", version, about = "Semi-supervised extractive dialog summarization")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a TweetSumm export into canonical JSONL splits.
    Ingest(IngestArgs),
    /// Score a heuristic baseline on a dataset split.
    Baseline(BaselineArgs),
    /// Pseudo-label the unlabeled part of the training split once.
    Pseudolabel(PseudolabelArgs),
    /// Run the semi-supervised cycle loop.
    Run(RunArgs),
    /// Score a predictions file against a dataset split.
    Evaluate(EvaluateArgs),
    /// Write the wire-protocol conformance fixtures.
    Fixtures(FixturesArgs),
    /// Write a seeded synthetic dataset in canonical form.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Lead1,
    Lead2,
    Long1,
}

impl From<MethodArg> for Heuristic {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lead1 => Heuristic::Lead1,
            MethodArg::Lead2 => Heuristic::Lead2,
            MethodArg::Long1 => Heuristic::Long1,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset file or directory.
    #[arg(long)]
    pub data: PathBuf,
    /// canonical-jsonl or tweetsumm-import.
    #[arg(long, default_value = "canonical-jsonl")]
    pub format: String,
}

impl DataArgs {
    fn load(&self) -> Result<DatasetSplit> {
        let format: DatasetFormat = self.format.parse()?;
        load_dataset(&self.data, format).with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// TweetSumm export: a directory of split files or a single file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for train/validation/test JSONL.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 80)]
    pub token_limit: usize,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Stem tokens before scoring.
    #[arg(long)]
    pub stem: bool,
    /// Write the evaluation report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PseudolabelArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// http(s) base URL, stub:oracle or stub:noisy:<rate>[:out].
    #[arg(long)]
    pub labeler_url: String,
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub shots: usize,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub failure_threshold: f64,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    /// Candidates are written here as JSON lines.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. --set cycles=3.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Continue the run checkpointed in this directory.
    #[arg(long, value_name = "RUN_DIR")]
    pub resume: Option<PathBuf>,
    /// Also write the run report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON lines of {"id", "indices"} or {"id", "text"}.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = 80)]
    pub token_limit: usize,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long)]
    pub stem: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 880)]
    pub train: usize,
    #[arg(long, default_value_t = 110)]
    pub validation: usize,
    #[arg(long, default_value_t = 110)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn split_of(data: &DatasetSplit, split: SplitArg) -> &[LabeledExample] {
    match split {
        SplitArg::Train => &data.train,
        SplitArg::Validation => &data.validation,
        SplitArg::Test => &data.test,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let body = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn print_scores(out: &mut dyn Write, label: &str, report: &EvalReport) -> Result<()> {
    let [r1, r2, rl] = report.percentages();
    writeln!(out, "{label} R-1={r1:.2} R-2={r2:.2} R-L={rl:.2} n={}", report.n)?;
    Ok(())
}

/// Backends built from specs; stubs are seeded from the dataset.
pub struct BuiltBackends {
    pub labeler: Option<Box<dyn CompletionBackend>>,
    pub summarizer: Box<dyn SummarizerBackend>,
    pub embedder: Box<dyn EmbeddingBackend>,
    pub cache: Option<PseudoLabelCache>,
}

impl BuiltBackends {
    pub fn as_backends(&self) -> Backends<'_> {
        Backends {
            labeler: self.labeler.as_deref(),
            summarizer: self.summarizer.as_ref(),
            embedder: self.embedder.as_ref(),
            cache: self.cache.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub timeout: Duration,
    pub max_attempts: u32,
    pub max_in_flight: usize,
    pub token_limit: usize,
}

fn http_backend(url: &str, settings: &HttpSettings, with_key: bool) -> HttpBackend {
    let mut config = HttpConfig::new(url);
    config.timeout = settings.timeout;
    config.retry = RetryPolicy { max_attempts: settings.max_attempts, ..RetryPolicy::default() };
    config.max_in_flight = settings.max_in_flight;
    config.token_limit = settings.token_limit;
    if with_key {
        config.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
    }
    HttpBackend::new(config)
}

pub fn build_labeler(
    spec: &BackendSpec,
    data: &DatasetSplit,
    seed: u64,
    settings: &HttpSettings,
) -> Result<Box<dyn CompletionBackend>> {
    let register = |mut labeler: StubLabeler| {
        for ex in data.all() {
            labeler.register(&ex.dialog, ex.primary_reference());
        }
        labeler.with_token_limit(settings.token_limit)
    };
    Ok(match spec {
        BackendSpec::StubOracle => Box::new(register(StubLabeler::oracle(seed))),
        BackendSpec::StubNoisy { rate, mode } => Box::new(register(StubLabeler::noisy(seed, *rate, (*mode).into()))),
        BackendSpec::Http(url) => Box::new(http_backend(url, settings, true)),
        other => bail!("{other:?} cannot act as a labeller"),
    })
}

pub fn build_summarizer(spec: &BackendSpec, settings: &HttpSettings) -> Result<Box<dyn SummarizerBackend>> {
    Ok(match spec {
        BackendSpec::StubLong1 => Box::new(HeuristicSummarizer::new()),
        BackendSpec::Http(url) => Box::new(http_backend(url, settings, false)),
        other => bail!("{other:?} cannot act as a summarizer"),
    })
}

pub fn build_embedder(
    spec: &BackendSpec,
    data: &DatasetSplit,
    settings: &HttpSettings,
) -> Result<Box<dyn EmbeddingBackend>> {
    Ok(match spec {
        BackendSpec::StubTfIdf => {
            let texts: Vec<&str> =
                data.all().flat_map(|e| e.dialog.sentences.iter().map(|s| s.text.as_str())).collect();
            Box::new(TfIdfEmbedder::fit(&texts)?)
        }
        BackendSpec::Http(url) => Box::new(http_backend(url, settings, false)),
        other => bail!("{other:?} cannot act as an embedder"),
    })
}

pub fn build_backends(config: &RunConfig, data: &DatasetSplit) -> Result<BuiltBackends> {
    let settings = HttpSettings {
        timeout: config.timeout,
        max_attempts: config.max_attempts,
        max_in_flight: config.cycle.max_in_flight,
        token_limit: config.cycle.max_total_tokens,
    };
    let labeler = match config.labeler_spec()? {
        Some(spec) => Some(build_labeler(&spec, data, config.cycle.seed, &settings)?),
        None => None,
    };
    let cache = match &config.cache_dir {
        Some(dir) => Some(PseudoLabelCache::open(dir).with_context(|| format!("opening cache {}", dir.display()))?),
        None => None,
    };
    Ok(BuiltBackends {
        labeler,
        summarizer: build_summarizer(&config.trainer_spec()?, &settings)?,
        embedder: build_embedder(&config.embedder_spec()?, data, &settings)?,
        cache,
    })
}

fn cmd_ingest(args: &IngestArgs, out: &mut dyn Write) -> Result<()> {
    let (split, stats) =
        import_tweetsumm(&args.input).with_context(|| format!("importing {}", args.input.display()))?;
    let (train, val, test) = split.sizes();
    if train + val + test == 0 {
        bail!("{} contains no usable dialogs", args.input.display());
    }
    split.validate()?;
    write_canonical(&split, &args.out)?;
    writeln!(out, "train={train} val={val} test={test}")?;
    writeln!(out, "alignment_failures={}", stats.alignment_failures())?;
    Ok(())
}

fn cmd_baseline(args: &BaselineArgs, out: &mut dyn Write) -> Result<()> {
    let data = args.data.load()?;
    let examples = split_of(&data, args.split);
    let heuristic = Heuristic::from(args.method);
    let predictions: Vec<_> = examples.iter().map(|e| heuristic.apply(&e.dialog)).collect();
    let references: Vec<_> = examples.iter().map(|e| e.references.clone()).collect();
    let report = evaluate(&predictions, &references, args.token_limit, RougeConfig { stem: args.stem })?;
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    print_scores(out, heuristic.name(), &report)
}

fn cmd_pseudolabel(args: &PseudolabelArgs, out: &mut dyn Write) -> Result<()> {
    let data = args.data.load()?;
    let settings = HttpSettings {
        timeout: Duration::from_secs(120),
        max_attempts: 4,
        max_in_flight: args.max_in_flight,
        token_limit: 4096,
    };
    let spec = BackendSpec::parse(&args.labeler_url).map_err(|e| anyhow!(e))?;
    let labeler = build_labeler(&spec, &data, args.seed, &settings)?;
    let pools = subsample_labeled(&data.train, args.fraction, args.seed)?;
    let shots = orchestrator::choose_shots(&pools.labeled, args.shots, args.seed);
    let cache = match &args.cache_dir {
        Some(dir) => Some(PseudoLabelCache::open(dir)?),
        None => None,
    };
    let label_settings = LabelSettings {
        failure_threshold: args.failure_threshold,
        max_in_flight: args.max_in_flight,
        ..LabelSettings::default()
    };
    let outcome = pseudolabel_all(&pools.unlabeled, labeler.as_ref(), &shots, &label_settings, cache.as_ref())?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut file = std::io::BufWriter::new(fs::File::create(&args.out)?);
    for c in &outcome.candidates {
        writeln!(file, "{}", serde_json::to_string(c)?)?;
    }
    file.flush()?;
    writeln!(
        out,
        "candidates={} failures={} labeler_calls={}",
        outcome.candidates.len(),
        outcome.failures.len(),
        outcome.labeler_calls
    )?;
    Ok(())
}

fn run_overrides(args: &RunArgs) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for s in &args.set {
        let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {s:?}"))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    let flags: [(&str, Option<String>); 8] = [
        ("mode", args.mode.clone()),
        ("cycles", args.cycles.map(|v| v.to_string())),
        ("k_per_cycle", args.k.map(|v| v.to_string())),
        ("epochs_per_cycle", args.epochs.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("fraction", args.fraction.map(|v| v.to_string())),
        ("dataset", args.data.as_ref().map(|p| p.display().to_string())),
        ("run_dir", args.run_dir.as_ref().map(|p| p.display().to_string())),
    ];
    pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    Ok(pairs)
}

fn print_run(out: &mut dyn Write, report: &RunReport) -> Result<()> {
    writeln!(
        out,
        "labeled={} unlabeled={} candidates={} failures={}",
        report.labeled,
        report.unlabeled,
        report.candidates,
        report.labeling_failures.len()
    )?;
    for c in &report.cycles {
        writeln!(
            out,
            "cycle {}: train={} selected={} R-1={:.2} R-2={:.2} R-L={:.2}",
            c.cycle,
            c.training_size,
            c.selected.len(),
            c.test.rouge1 * 100.0,
            c.test.rouge2 * 100.0,
            c.test.rouge_l * 100.0
        )?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = RunConfig::default();
    if let Some(dir) = &args.resume {
        config.cycle = orchestrator::load_checkpoint(dir)?.config;
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply(&crate::config::parse_pairs(&text, &path.display().to_string())?)?;
    }
    config.apply(&run_overrides(args)?)?;
    config.validate().map_err(|e| anyhow!("invalid configuration: {e}"))?;
    let dataset = config.dataset.clone().ok_or_else(|| anyhow!("no dataset given (use --data or dataset = ...)"))?;
    let data =
        load_dataset(&dataset, config.dataset_format).with_context(|| format!("loading {}", dataset.display()))?;
    let built = build_backends(&config, &data)?;
    let report = match &args.resume {
        Some(dir) => orchestrator::resume(&config.cycle, dir, &data, &built.as_backends())?,
        None => orchestrator::run(&config.cycle, &data, &built.as_backends(), config.run_dir.as_deref())?,
    };
    if let Some(path) = &args.out {
        fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    print_run(out, &report)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PredictionLine {
    Indices { id: String, indices: Vec<usize> },
    Text { id: String, text: String },
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let data = args.data.load()?;
    let examples = split_of(&data, args.split);
    let content =
        fs::read_to_string(&args.predictions).with_context(|| format!("reading {}", args.predictions.display()))?;
    let mut by_id = std::collections::HashMap::new();
    for (i, line) in content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: PredictionLine = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: bad prediction", args.predictions.display(), i + 1))?;
        let (id, text) = match p {
            PredictionLine::Text { id, text } => (id, text),
            PredictionLine::Indices { id, indices } => {
                let ex = examples
                    .iter()
                    .find(|e| e.id() == id)
                    .ok_or_else(|| anyhow!("prediction for unknown dialog {id}"))?;
                let summary = crate::corpus::ExtractiveSummary::from_indices(&ex.dialog, indices)?;
                (id, summary.text)
            }
        };
        by_id.insert(id, text);
    }
    let mut predictions = Vec::with_capacity(examples.len());
    let mut references = Vec::with_capacity(examples.len());
    for ex in examples {
        let text = by_id.remove(ex.id()).ok_or_else(|| anyhow!("no prediction for dialog {}", ex.id()))?;
        predictions.push(text);
        references.push(ex.references.iter().map(|r| r.text.clone()).collect::<Vec<_>>());
    }
    let report = evaluate_texts(&predictions, &references, args.token_limit, RougeConfig { stem: args.stem })?;
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    print_scores(out, "predictions", &report)
}

fn cmd_fixtures(args: &FixturesArgs, out: &mut dyn Write) -> Result<()> {
    let n = wire::write_fixtures(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    writeln!(out, "wrote {n} fixtures to {}", args.out.display())?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let split = synthetic::generate_split(args.train, args.validation, args.test, args.seed);
    write_canonical(&split, &args.out)?;
    let (train, val, test) = split.sizes();
    writeln!(out, "train={train} val={val} test={test}")?;
    Ok(())
}

/// Runs one parsed command, writing its summary lines to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Baseline(a) => cmd_baseline(a, out),
        Command::Pseudolabel(a) => cmd_pseudolabel(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Fixtures(a) => cmd_fixtures(a, out),
        Command::Synth(a) => cmd_synth(a, out),
    }
}
