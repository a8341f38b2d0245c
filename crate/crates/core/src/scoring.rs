//! Confidence scores for pseudo-labels and per-cycle example selection.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dialog, ExtractiveSummary};
use crate::prompting::{reconstruct_summary, ParsedAnswer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScoringError {
    #[error("answer has no number tokens to score")]
    EmptySpans,
    #[error("answer index {index} is outside 1..={n} for dialog {id}")]
    InvalidAnswer { id: String, index: usize, n: usize },
}

/// A dialog with its parsed labeller answer, the summary rebuilt from it, and
/// the answer's confidence score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelCandidate {
    pub dialog: Dialog,
    pub answer: ParsedAnswer,
    pub summary: ExtractiveSummary,
    pub score: f64,
}

impl PseudoLabelCandidate {
    /// With `normalize` set the score is divided by the number of scored
    /// number tokens.
    pub fn new(dialog: Dialog, answer: ParsedAnswer, normalize: bool) -> Result<Self, ScoringError> {
        let n = dialog.n_sentences();
        if let Some(&bad) = answer.customer_indices.iter().chain(&answer.agent_indices).find(|&&i| i == 0 || i > n) {
            return Err(ScoringError::InvalidAnswer { id: dialog.id.clone(), index: bad, n });
        }
        let mut score = score_candidate(&answer)?;
        if normalize {
            score /= answer.number_token_spans.len() as f64;
        }
        let summary = reconstruct_summary(&dialog, &answer);
        Ok(PseudoLabelCandidate { dialog, answer, summary, score })
    }

    pub fn id(&self) -> &str {
        &self.dialog.id
    }
}

/// Sum of the log-probabilities of the number tokens.
pub fn score_candidate(answer: &ParsedAnswer) -> Result<f64, ScoringError> {
    if answer.number_token_spans.is_empty() {
        return Err(ScoringError::EmptySpans);
    }
    Ok(answer.number_token_spans.iter().map(|s| s.logprob).sum())
}

fn by_score_then_id(a: &PseudoLabelCandidate, b: &PseudoLabelCandidate) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.dialog.id.cmp(&b.dialog.id))
}

fn eligible<'a>(
    candidates: &'a [PseudoLabelCandidate],
    already_selected: &HashSet<String>,
) -> Vec<&'a PseudoLabelCandidate> {
    let mut seen = HashSet::new();
    candidates
        .iter()
        .filter(|c| !already_selected.contains(&c.dialog.id) && seen.insert(c.dialog.id.as_str()))
        .collect()
}

/// The `k` highest-scoring candidates not yet selected, best first. Equal
/// scores are ordered by dialog id.
pub fn select_top_k(
    candidates: &[PseudoLabelCandidate],
    k: usize,
    already_selected: &HashSet<String>,
) -> Vec<PseudoLabelCandidate> {
    let mut pool = eligible(candidates, already_selected);
    pool.sort_by(|a, b| by_score_then_id(a, b));
    pool.into_iter().take(k).cloned().collect()
}

/// `k` candidates drawn uniformly without replacement from those not yet
/// selected. The draw depends only on the eligible ids and `seed`.
pub fn select_random_k(
    candidates: &[PseudoLabelCandidate],
    k: usize,
    already_selected: &HashSet<String>,
    seed: u64,
) -> Vec<PseudoLabelCandidate> {
    let mut pool = eligible(candidates, already_selected);
    pool.sort_by(|a, b| a.dialog.id.cmp(&b.dialog.id));
    let k = k.min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i].clone()).collect()
}
