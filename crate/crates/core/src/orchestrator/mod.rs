//! The cycle loop: pseudo-label once, then repeatedly select, merge, retrain
//! and evaluate, checkpointing after every cycle.

mod label;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use label::{heuristic_candidates, pseudolabel_all, self_label, LabelFailure, LabelSettings, LabelingOutcome};

use crate::backends::{
    sha256_hex, BackendError, CompletionBackend, EmbeddingBackend, ModelHandle, PseudoLabelCache, SummarizerBackend,
    TrainConfig, TrainExample,
};
use crate::corpus::{
    merge_pools, subsample_labeled, CorpusError, DatasetSplit, ExtractiveSummary, LabeledExample, Pools,
};
use crate::heuristics::Heuristic;
use crate::matching::{to_extractive, MatchingError};
use crate::metrics::{evaluate, EvalReport, MetricsError, RougeConfig};
use crate::prompting::{allowed_shots_at_most, FewShotExample, PromptError, PromptTemplates, ALLOWED_SHOTS};
use crate::scoring::{select_random_k, select_top_k, PseudoLabelCandidate};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mode {0} needs a {1} backend")]
    MissingBackend(Mode, &'static str),
    #[error("{failed} of {total} dialogs could not be pseudo-labelled (threshold {threshold})")]
    LabelingFailed { failed: usize, total: usize, threshold: f64 },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Pseudo-labels from the completion model, ranked by confidence.
    #[serde(rename = "llm-qa")]
    LlmQa,
    /// The summarizer labels the unlabeled pool itself.
    #[serde(rename = "vanilla")]
    Vanilla,
    #[serde(rename = "lead1-iter")]
    Lead1Iter,
    #[serde(rename = "long1-iter")]
    Long1Iter,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::LlmQa => "llm-qa",
            Mode::Vanilla => "vanilla",
            Mode::Lead1Iter => "lead1-iter",
            Mode::Long1Iter => "long1-iter",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Mode::LlmQa, Mode::Vanilla, Mode::Lead1Iter, Mode::Long1Iter]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?} (expected llm-qa, vanilla, lead1-iter or long1-iter)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    #[serde(rename = "top-k")]
    TopK,
    #[serde(rename = "random-k")]
    RandomK,
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top-k" => Ok(Selection::TopK),
            "random-k" => Ok(Selection::RandomK),
            other => Err(format!("unknown selection {other:?} (expected top-k or random-k)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    pub mode: Mode,
    pub cycles: usize,
    pub k_per_cycle: usize,
    pub epochs_per_cycle: usize,
    /// Defaults to top-k in llm-qa mode and random-k otherwise.
    pub selection: Option<Selection>,
    pub seed: u64,
    /// Share of the training split kept labeled.
    pub fraction: f64,
    /// Evaluation length limit in tokens; also the generation budget.
    pub token_limit: usize,
    pub shots: usize,
    pub max_total_tokens: usize,
    pub max_answer_tokens: usize,
    pub normalize_score: bool,
    /// Fine-tune the previous cycle's model instead of the base model.
    pub continue_training: bool,
    /// Vanilla mode only: relabel the unlabeled pool with each new model.
    pub regenerate: bool,
    pub failure_threshold: f64,
    pub max_in_flight: usize,
    pub stem: bool,
    pub templates: PromptTemplates,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            mode: Mode::LlmQa,
            cycles: 10,
            k_per_cycle: 16,
            epochs_per_cycle: 10,
            selection: None,
            seed: 0,
            fraction: 0.1,
            token_limit: 80,
            shots: 2,
            max_total_tokens: 4096,
            max_answer_tokens: 64,
            normalize_score: false,
            continue_training: false,
            regenerate: false,
            failure_threshold: 0.5,
            max_in_flight: 4,
            stem: false,
            templates: PromptTemplates::default(),
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let fail = |m: String| Err(OrchestratorError::Config(m));
        if self.cycles == 0 {
            return fail("cycles must be at least 1".into());
        }
        if self.k_per_cycle == 0 {
            return fail("k_per_cycle must be at least 1".into());
        }
        if self.epochs_per_cycle == 0 {
            return fail("epochs_per_cycle must be at least 1".into());
        }
        if self.token_limit == 0 {
            return fail("token_limit must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return fail(format!("fraction {} is outside [0, 1]", self.fraction));
        }
        if !ALLOWED_SHOTS.contains(&self.shots) {
            return fail(format!("shots must be one of {ALLOWED_SHOTS:?}"));
        }
        if self.max_answer_tokens >= self.max_total_tokens {
            return fail("max_answer_tokens must be below max_total_tokens".into());
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return fail("failure_threshold must be in [0, 1]".into());
        }
        if self.max_in_flight == 0 {
            return fail("max_in_flight must be at least 1".into());
        }
        Ok(())
    }

    pub fn effective_selection(&self) -> Selection {
        self.selection.unwrap_or(match self.mode {
            Mode::LlmQa => Selection::TopK,
            _ => Selection::RandomK,
        })
    }

    fn label_settings(&self) -> LabelSettings {
        LabelSettings {
            max_total_tokens: self.max_total_tokens,
            max_answer_tokens: self.max_answer_tokens,
            templates: self.templates.clone(),
            normalize_score: self.normalize_score,
            failure_threshold: self.failure_threshold,
            max_in_flight: self.max_in_flight,
        }
    }

    fn rouge(&self) -> RougeConfig {
        RougeConfig { stem: self.stem }
    }

    /// Every field except `cycles` must match for a checkpoint to be resumed.
    fn resumable_with(&self, other: &CycleConfig) -> bool {
        CycleConfig { cycles: other.cycles, ..self.clone() } == *other
    }
}

/// The model roles a run talks to.
#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub labeler: Option<&'a dyn CompletionBackend>,
    pub summarizer: &'a dyn SummarizerBackend,
    pub embedder: &'a dyn EmbeddingBackend,
    pub cache: Option<&'a PseudoLabelCache>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub id: String,
    pub indices: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleScores {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

impl From<&EvalReport> for CycleScores {
    fn from(r: &EvalReport) -> Self {
        CycleScores { rouge1: r.rouge1, rouge2: r.rouge2, rouge_l: r.rouge_l }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    /// 1-based.
    pub cycle: usize,
    /// Labeled plus selected examples the model was trained on.
    pub training_size: usize,
    /// Examples selected in this cycle, in selection order.
    pub selected: Vec<SelectionRecord>,
    pub selected_total: usize,
    pub model_id: String,
    pub test: CycleScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: CycleConfig,
    pub labeled: usize,
    pub unlabeled: usize,
    pub candidates: usize,
    pub labeling_failures: Vec<LabelFailure>,
    pub cycles: Vec<CycleReport>,
    pub final_model: Option<ModelHandle>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run report serializes") + "\n"
    }
}

/// Everything needed to continue a run after the last completed cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub config: CycleConfig,
    pub data_fingerprint: String,
    pub pools: Pools,
    pub candidates: Vec<PseudoLabelCandidate>,
    pub failures: Vec<LabelFailure>,
    pub model: Option<ModelHandle>,
    pub cycles: Vec<CycleReport>,
}

impl RunState {
    pub fn report(&self) -> RunReport {
        RunReport {
            config: self.config.clone(),
            labeled: self.pools.labeled.len(),
            unlabeled: self.pools.unlabeled.len() + self.pools.selected.len(),
            candidates: self.candidates.len(),
            labeling_failures: self.failures.clone(),
            cycles: self.cycles.clone(),
            final_model: self.model.clone(),
        }
    }
}

pub fn data_fingerprint(data: &DatasetSplit) -> String {
    let bytes = serde_json::to_vec(data).expect("dataset serializes");
    sha256_hex(&bytes)
}

fn mix(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Seeded draw of up to `requested` few-shot examples from the labeled pool,
/// rounded down to an allowed shot count.
pub fn choose_shots(labeled: &[LabeledExample], requested: usize, seed: u64) -> Vec<FewShotExample> {
    let n = allowed_shots_at_most(requested.min(labeled.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x5107));
    let mut picks = rand::seq::index::sample(&mut rng, labeled.len(), n).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| FewShotExample::from_labeled(&labeled[i])).collect()
}

fn train_examples(pools: &Pools) -> Vec<TrainExample> {
    pools
        .training_pairs()
        .into_iter()
        .map(|(d, s)| TrainExample { input: d.source_text(), target: s.text.clone() })
        .collect()
}

fn train(
    pools: &Pools,
    previous: Option<&ModelHandle>,
    config: &CycleConfig,
    backends: &Backends,
) -> Result<ModelHandle, OrchestratorError> {
    let train_config = TrainConfig {
        init_from: if config.continue_training { previous.map(|m| m.id.clone()) } else { None },
        seed: Some(config.seed),
    };
    Ok(backends.summarizer.train(&train_examples(pools), config.epochs_per_cycle, &train_config)?)
}

/// Summarizes every test dialog with `model`, repairs each output to an
/// extractive summary and scores it against the references.
pub fn evaluate_model(
    model: &ModelHandle,
    test: &[LabeledExample],
    backends: &Backends,
    config: &CycleConfig,
) -> Result<EvalReport, OrchestratorError> {
    let pool = label::thread_pool(config.max_in_flight)?;
    let predictions: Vec<ExtractiveSummary> = pool.install(|| {
        test.par_iter()
            .map(|ex| {
                let generated = backends.summarizer.summarize(model, &ex.dialog.source_text(), config.token_limit)?;
                match to_extractive(&generated, &ex.dialog, backends.embedder) {
                    Ok(s) => Ok(s),
                    Err(MatchingError::EmptyGeneration) => {
                        Ok(ExtractiveSummary::from_indices(&ex.dialog, Vec::new()).expect("empty summary is valid"))
                    }
                    Err(e) => Err(OrchestratorError::from(e)),
                }
            })
            .collect::<Result<_, OrchestratorError>>()
    })?;
    let references: Vec<Vec<ExtractiveSummary>> = test.iter().map(|ex| ex.references.clone()).collect();
    Ok(evaluate(&predictions, &references, config.token_limit, config.rouge())?)
}

/// Splits the training data into pools and produces the candidate set for
/// the configured mode.
pub fn prepare(config: &CycleConfig, data: &DatasetSplit, backends: &Backends) -> Result<RunState, OrchestratorError> {
    config.validate()?;
    let pools = subsample_labeled(&data.train, config.fraction, config.seed)?;
    let mut model = None;
    let outcome = match config.mode {
        Mode::LlmQa => {
            let labeler = backends.labeler.ok_or(OrchestratorError::MissingBackend(config.mode, "labeler"))?;
            let shots = choose_shots(&pools.labeled, config.shots, config.seed);
            pseudolabel_all(&pools.unlabeled, labeler, &shots, &config.label_settings(), backends.cache)?
        }
        Mode::Lead1Iter | Mode::Long1Iter => {
            let heuristic = if config.mode == Mode::Lead1Iter { Heuristic::Lead1 } else { Heuristic::Long1 };
            LabelingOutcome { candidates: heuristic_candidates(&pools.unlabeled, heuristic), ..Default::default() }
        }
        Mode::Vanilla => {
            if pools.labeled.is_empty() {
                return Err(OrchestratorError::Config("vanilla mode needs a non-empty labeled pool".into()));
            }
            let initial = train(&pools, None, config, backends)?;
            let outcome = self_label(
                &pools.unlabeled,
                backends.summarizer,
                &initial,
                backends.embedder,
                config.token_limit,
                &config.label_settings(),
            )?;
            model = Some(initial);
            outcome
        }
    };
    log::info!(
        "{} labeled, {} unlabeled, {} candidates, {} labelling failures",
        pools.labeled.len(),
        pools.unlabeled.len(),
        outcome.candidates.len(),
        outcome.failures.len()
    );
    Ok(RunState {
        config: config.clone(),
        data_fingerprint: data_fingerprint(data),
        pools,
        candidates: outcome.candidates,
        failures: outcome.failures,
        model,
        cycles: Vec::new(),
    })
}

/// One select, merge, train and evaluate step.
pub fn run_cycle(state: &RunState, data: &DatasetSplit, backends: &Backends) -> Result<RunState, OrchestratorError> {
    let config = &state.config;
    let cycle = state.cycles.len() + 1;
    let mut candidates = state.candidates.clone();
    if config.mode == Mode::Vanilla && config.regenerate && cycle > 1 {
        let model = state.model.as_ref().expect("vanilla runs always hold a model");
        let outcome = self_label(
            &state.pools.unlabeled,
            backends.summarizer,
            model,
            backends.embedder,
            config.token_limit,
            &config.label_settings(),
        )?;
        candidates = outcome.candidates;
    }

    let already = state.pools.selected_ids();
    let picks = match config.effective_selection() {
        Selection::TopK => select_top_k(&candidates, config.k_per_cycle, &already),
        Selection::RandomK => {
            select_random_k(&candidates, config.k_per_cycle, &already, mix(config.seed, cycle as u64))
        }
    };
    if picks.is_empty() {
        log::info!("cycle {cycle}: no candidates left to select");
    }
    let pools = merge_pools(&state.pools, &picks)?;
    let model = train(&pools, state.model.as_ref(), config, backends)?;
    let eval = evaluate_model(&model, &data.test, backends, config)?;
    log::info!(
        "cycle {cycle}: trained on {}, test R-1 {:.2} R-2 {:.2} R-L {:.2}",
        pools.training_len(),
        eval.rouge1 * 100.0,
        eval.rouge2 * 100.0,
        eval.rouge_l * 100.0
    );

    let report = CycleReport {
        cycle,
        training_size: pools.training_len(),
        selected: picks
            .iter()
            .map(|c| SelectionRecord { id: c.dialog.id.clone(), indices: c.summary.indices.clone(), score: c.score })
            .collect(),
        selected_total: pools.selected.len(),
        model_id: model.id.clone(),
        test: CycleScores::from(&eval),
    };
    let mut next = state.clone();
    next.candidates = candidates;
    next.pools = pools;
    next.model = Some(model);
    next.cycles.push(report);
    Ok(next)
}

pub fn checkpoint_path(run_dir: &Path) -> PathBuf {
    run_dir.join("checkpoint.json")
}

pub fn report_path(run_dir: &Path) -> PathBuf {
    run_dir.join("report.json")
}

fn io_error(path: &Path, source: std::io::Error) -> OrchestratorError {
    OrchestratorError::Io { path: path.display().to_string(), source }
}

fn write_atomic(path: &Path, body: &[u8]) -> Result<(), OrchestratorError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, body).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

pub fn save_checkpoint(run_dir: &Path, state: &RunState) -> Result<(), OrchestratorError> {
    fs::create_dir_all(run_dir).map_err(|e| io_error(run_dir, e))?;
    let body = serde_json::to_vec(state).expect("run state serializes");
    write_atomic(&checkpoint_path(run_dir), &body)
}

pub fn load_checkpoint(run_dir: &Path) -> Result<RunState, OrchestratorError> {
    let path = checkpoint_path(run_dir);
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| OrchestratorError::Checkpoint { path: path.display().to_string(), message: e.to_string() })
}

fn drive(
    mut state: RunState,
    data: &DatasetSplit,
    backends: &Backends,
    run_dir: Option<&Path>,
) -> Result<RunReport, OrchestratorError> {
    while state.cycles.len() < state.config.cycles {
        state = run_cycle(&state, data, backends)?;
        if let Some(dir) = run_dir {
            save_checkpoint(dir, &state)?;
        }
    }
    let report = state.report();
    if let Some(dir) = run_dir {
        write_atomic(&report_path(dir), report.to_json().as_bytes())?;
    }
    Ok(report)
}

/// Runs all cycles from scratch. With `run_dir`, the state is checkpointed
/// after preparation and after each cycle, and the report is written there.
pub fn run(
    config: &CycleConfig,
    data: &DatasetSplit,
    backends: &Backends,
    run_dir: Option<&Path>,
) -> Result<RunReport, OrchestratorError> {
    let state = prepare(config, data, backends)?;
    if let Some(dir) = run_dir {
        save_checkpoint(dir, &state)?;
    }
    drive(state, data, backends, run_dir)
}

/// Continues the run checkpointed in `run_dir` up to `config.cycles`. The
/// configuration may differ from the checkpointed one only in `cycles`, and
/// the dataset must be the one the run started with.
pub fn resume(
    config: &CycleConfig,
    run_dir: &Path,
    data: &DatasetSplit,
    backends: &Backends,
) -> Result<RunReport, OrchestratorError> {
    config.validate()?;
    let mut state = load_checkpoint(run_dir)?;
    let path = checkpoint_path(run_dir).display().to_string();
    if !state.config.resumable_with(config) {
        return Err(OrchestratorError::Checkpoint {
            path,
            message: "configuration differs from the checkpointed run".into(),
        });
    }
    if state.data_fingerprint != data_fingerprint(data) {
        return Err(OrchestratorError::Checkpoint {
            path,
            message: "dataset differs from the checkpointed run".into(),
        });
    }
    if state.cycles.len() > config.cycles {
        return Err(OrchestratorError::Checkpoint {
            path,
            message: format!("checkpoint already has {} cycles", state.cycles.len()),
        });
    }
    state.config.cycles = config.cycles;
    log::info!("resuming after cycle {}", state.cycles.len());
    drive(state, data, backends, Some(run_dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{HeuristicSummarizer, StubLabeler, TfIdfEmbedder};
    use crate::corpus::synthetic;

    struct Fixture {
        data: DatasetSplit,
        labeler: StubLabeler,
        summarizer: HeuristicSummarizer,
        embedder: TfIdfEmbedder,
    }

    impl Fixture {
        fn new(n_train: usize) -> Self {
            let data = synthetic::generate_split(n_train, 2, 6, 17);
            let mut labeler = StubLabeler::oracle(1);
            for ex in data.all() {
                labeler.register(&ex.dialog, ex.primary_reference());
            }
            let texts: Vec<String> =
                data.all().flat_map(|e| e.dialog.sentences.iter().map(|s| s.text.clone())).collect();
            let embedder = TfIdfEmbedder::fit(&texts).unwrap();
            Fixture { data, labeler, summarizer: HeuristicSummarizer::new(), embedder }
        }

        fn backends(&self) -> Backends<'_> {
            Backends {
                labeler: Some(&self.labeler),
                summarizer: &self.summarizer,
                embedder: &self.embedder,
                cache: None,
            }
        }
    }

    fn small(mode: Mode) -> CycleConfig {
        CycleConfig {
            mode,
            cycles: 2,
            k_per_cycle: 4,
            epochs_per_cycle: 2,
            fraction: 0.2,
            max_in_flight: 2,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(CycleConfig::default().validate().is_ok());
        for bad in [
            CycleConfig { cycles: 0, ..Default::default() },
            CycleConfig { k_per_cycle: 0, ..Default::default() },
            CycleConfig { shots: 3, ..Default::default() },
            CycleConfig { fraction: 2.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(OrchestratorError::Config(_))));
        }
        assert_eq!("long1-iter".parse::<Mode>().unwrap(), Mode::Long1Iter);
        assert!("lead3-iter".parse::<Mode>().is_err());
    }

    #[test]
    fn pool_growth_per_cycle() {
        let f = Fixture::new(30);
        let report = run(&small(Mode::LlmQa), &f.data, &f.backends(), None).unwrap();
        assert_eq!(report.labeled, 6);
        let sizes: Vec<usize> = report.cycles.iter().map(|c| c.training_size).collect();
        assert_eq!(sizes, [10, 14]);
    }

    #[test]
    fn exhausted_candidates_still_train() {
        let f = Fixture::new(10);
        let config = CycleConfig { cycles: 3, k_per_cycle: 5, ..small(Mode::Long1Iter) };
        let report = run(&config, &f.data, &f.backends(), None).unwrap();
        let new: Vec<usize> = report.cycles.iter().map(|c| c.selected.len()).collect();
        assert_eq!(new, [5, 3, 0]);
        assert_eq!(report.cycles[2].training_size, 10);
    }

    #[test]
    fn llm_mode_needs_labeler() {
        let f = Fixture::new(10);
        let backends = Backends { labeler: None, ..f.backends() };
        assert!(matches!(
            run(&small(Mode::LlmQa), &f.data, &backends, None),
            Err(OrchestratorError::MissingBackend(Mode::LlmQa, _))
        ));
    }

    #[test]
    fn vanilla_mode_runs() {
        let f = Fixture::new(20);
        let config = CycleConfig { regenerate: true, ..small(Mode::Vanilla) };
        let report = run(&config, &f.data, &f.backends(), None).unwrap();
        assert_eq!(report.cycles.len(), 2);
        assert_eq!(report.cycles[1].selected_total, 8);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let f = Fixture::new(20);
        let full = run(&small(Mode::LlmQa), &f.data, &f.backends(), None).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let one = CycleConfig { cycles: 1, ..small(Mode::LlmQa) };
        run(&one, &f.data, &f.backends(), Some(dir.path())).unwrap();
        let resumed = resume(&small(Mode::LlmQa), dir.path(), &f.data, &f.backends()).unwrap();
        assert_eq!(resumed, full);
        assert_eq!(fs::read_to_string(report_path(dir.path())).unwrap(), full.to_json());

        let other = CycleConfig { seed: 99, ..small(Mode::LlmQa) };
        assert!(matches!(
            resume(&other, dir.path(), &f.data, &f.backends()),
            Err(OrchestratorError::Checkpoint { .. })
        ));
    }
}
