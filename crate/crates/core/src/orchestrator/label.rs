//! Producing pseudo-label candidates for the unlabeled pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::backends::{
    BackendTokenCounter, CompletionBackend, EmbeddingBackend, ModelHandle, PseudoLabelCache, SummarizerBackend,
};
use crate::corpus::Dialog;
use crate::heuristics::Heuristic;
use crate::matching::to_extractive;
use crate::prompting::{
    build_qa_prompt, parse_qa_answer, split_by_role, FewShotExample, ParsedAnswer, PromptBudget, PromptTemplates,
};
use crate::scoring::PseudoLabelCandidate;

/// A dialog that produced no usable candidate, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelFailure {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelingOutcome {
    /// In unlabeled-pool order.
    pub candidates: Vec<PseudoLabelCandidate>,
    pub failures: Vec<LabelFailure>,
    /// Labeller requests actually sent (cache misses).
    #[serde(skip)]
    pub labeler_calls: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSettings {
    pub max_total_tokens: usize,
    pub max_answer_tokens: usize,
    pub templates: PromptTemplates,
    pub normalize_score: bool,
    /// Abort when more than this fraction of dialogs fail.
    pub failure_threshold: f64,
    pub max_in_flight: usize,
}

impl Default for LabelSettings {
    fn default() -> Self {
        LabelSettings {
            max_total_tokens: 4096,
            max_answer_tokens: 64,
            templates: PromptTemplates::default(),
            normalize_score: false,
            failure_threshold: 0.5,
            max_in_flight: 4,
        }
    }
}

pub(crate) fn thread_pool(n: usize) -> Result<rayon::ThreadPool, OrchestratorError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build()
        .map_err(|e| OrchestratorError::Config(format!("cannot start worker pool: {e}")))
}

enum Labelled {
    Ok(PseudoLabelCandidate, bool),
    Failed(LabelFailure, bool),
}

fn collect(results: Vec<Labelled>, threshold: f64) -> Result<LabelingOutcome, OrchestratorError> {
    let total = results.len();
    let mut outcome = LabelingOutcome::default();
    for r in results {
        match r {
            Labelled::Ok(c, called) => {
                outcome.labeler_calls += called as usize;
                outcome.candidates.push(c);
            }
            Labelled::Failed(f, called) => {
                outcome.labeler_calls += called as usize;
                log::warn!("no pseudo-label for {}: {}", f.id, f.reason);
                outcome.failures.push(f);
            }
        }
    }
    let failed = outcome.failures.len();
    if total > 0 && failed as f64 / total as f64 > threshold {
        return Err(OrchestratorError::LabelingFailed { failed, total, threshold });
    }
    Ok(outcome)
}

fn failure(dialog: &Dialog, reason: impl ToString, called: bool) -> Labelled {
    Labelled::Failed(LabelFailure { id: dialog.id.clone(), reason: reason.to_string() }, called)
}

fn label_one(
    dialog: &Dialog,
    labeler: &dyn CompletionBackend,
    shots: &[FewShotExample],
    budget: &PromptBudget,
    settings: &LabelSettings,
    cache: Option<&PseudoLabelCache>,
) -> Labelled {
    let counter = BackendTokenCounter(labeler);
    let prompt = match build_qa_prompt(dialog, shots, budget, &settings.templates, &counter) {
        Ok(p) => p.text,
        Err(e) => return failure(dialog, e, false),
    };
    let cached = cache.and_then(|c| c.get(&dialog.id, &prompt));
    let called = cached.is_none();
    let completion = match cached {
        Some(c) => c,
        None => match labeler.complete(&prompt, settings.max_answer_tokens, true) {
            Ok(c) => {
                if let Some(cache) = cache {
                    if let Err(e) = cache.put(&dialog.id, &prompt, &c) {
                        log::warn!("cannot cache pseudo-label for {}: {e}", dialog.id);
                    }
                }
                c
            }
            Err(e) => return failure(dialog, e, true),
        },
    };
    let answer = match parse_qa_answer(&completion, dialog.n_sentences()) {
        Ok(a) => a,
        Err(e) => return failure(dialog, e, called),
    };
    match PseudoLabelCandidate::new(dialog.clone(), answer, settings.normalize_score) {
        Ok(c) => Labelled::Ok(c, called),
        Err(e) => failure(dialog, e, called),
    }
}

/// Asks the labeller for sentence numbers for every dialog, once. Completions
/// are read from and written to `cache` when given. Dialogs whose answer is
/// missing, unparseable or out of range are reported as failures; the call
/// errors only when the failure rate exceeds the configured threshold.
pub fn pseudolabel_all(
    unlabeled: &[Dialog],
    labeler: &dyn CompletionBackend,
    shots: &[FewShotExample],
    settings: &LabelSettings,
    cache: Option<&PseudoLabelCache>,
) -> Result<LabelingOutcome, OrchestratorError> {
    let budget = PromptBudget::new(settings.max_total_tokens, settings.max_answer_tokens, shots.len())?;
    let pool = thread_pool(settings.max_in_flight)?;
    let results: Vec<Labelled> =
        pool.install(|| unlabeled.par_iter().map(|d| label_one(d, labeler, shots, &budget, settings, cache)).collect());
    collect(results, settings.failure_threshold)
}

fn candidate_from_indices(dialog: &Dialog, indices: &[usize]) -> Result<PseudoLabelCandidate, String> {
    let (customer, agent) = split_by_role(dialog, indices);
    let answer = ParsedAnswer::from_indices(customer, agent, 0.0);
    PseudoLabelCandidate::new(dialog.clone(), answer, false).map_err(|e| e.to_string())
}

/// Candidates whose summaries come from a heuristic. All score 0.
pub fn heuristic_candidates(unlabeled: &[Dialog], heuristic: Heuristic) -> Vec<PseudoLabelCandidate> {
    unlabeled.iter().filter_map(|d| candidate_from_indices(d, &heuristic.apply(d).indices).ok()).collect()
}

/// Candidates labelled by the current summarizer, repaired to extractive
/// summaries. All score 0.
pub fn self_label(
    unlabeled: &[Dialog],
    summarizer: &dyn SummarizerBackend,
    model: &ModelHandle,
    embedder: &dyn EmbeddingBackend,
    max_tokens: usize,
    settings: &LabelSettings,
) -> Result<LabelingOutcome, OrchestratorError> {
    let pool = thread_pool(settings.max_in_flight)?;
    let results: Vec<Labelled> = pool.install(|| {
        unlabeled
            .par_iter()
            .map(|d| {
                let generated = match summarizer.summarize(model, &d.source_text(), max_tokens) {
                    Ok(text) => text,
                    Err(e) => return failure(d, e, false),
                };
                let summary = match to_extractive(&generated, d, embedder) {
                    Ok(s) => s,
                    Err(e) => return failure(d, e, false),
                };
                match candidate_from_indices(d, &summary.indices) {
                    Ok(c) => Labelled::Ok(c, false),
                    Err(e) => failure(d, e, false),
                }
            })
            .collect()
    });
    collect(results, settings.failure_threshold)
}
