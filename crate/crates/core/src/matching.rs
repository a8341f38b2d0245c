//! Forces generated summaries back onto dialog sentences.

use std::collections::HashSet;

use thiserror::Error;

use crate::backends::{BackendError, EmbeddingBackend, EmbeddingVector};
use crate::corpus::{Dialog, ExtractiveSummary};
use crate::segment::{best_overlap, decompose_verbatim, normalize, split_text_sentences};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchingError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("generated summary contains no sentences")]
    EmptyGeneration,
    #[error("dialog {0} has no sentences")]
    EmptyDialog(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Cosine similarity in [-1, 1]; cosine distance is `1 - similarity`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MatchingError> {
    if a.dimension() != b.dimension() {
        return Err(MatchingError::DimensionMismatch(a.dimension(), b.dimension()));
    }
    let norm = |v: &EmbeddingVector| v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(MatchingError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Lowest index whose sentence text equals that of `index`.
fn canonical(dialog: &Dialog, index: usize) -> usize {
    let text = &dialog.sentences.get(index).expect("index from the table").text;
    dialog.sentences.iter().find(|s| &s.text == text).map_or(index, |s| s.index)
}

enum Slot {
    Matched(Vec<usize>),
    Pending(String),
}

/// Maps each sentence of `generated` onto a dialog sentence and returns the
/// resulting extractive summary, in generated order without repeats.
///
/// A text that already is a run of dialog sentences maps to exactly those
/// sentences. Otherwise each generated sentence is matched verbatim, then by
/// normalized text, and only then by embedding similarity (ties to the lowest
/// index). Sentences whose embedding is the zero vector fall back to token
/// overlap.
pub fn to_extractive(
    generated: &str,
    dialog: &Dialog,
    embedder: &dyn EmbeddingBackend,
) -> Result<ExtractiveSummary, MatchingError> {
    if dialog.sentences.is_empty() {
        return Err(MatchingError::EmptyDialog(dialog.id.clone()));
    }
    let indices = match decompose_verbatim(generated, &dialog.sentences) {
        Some(found) => found,
        None => match_sentences(generated, dialog, embedder)?,
    };
    let mut seen = HashSet::new();
    let indices: Vec<usize> = indices.into_iter().map(|i| canonical(dialog, i)).filter(|i| seen.insert(*i)).collect();
    Ok(ExtractiveSummary::from_indices(dialog, indices).expect("matched indices are valid and distinct"))
}

fn match_sentences(
    generated: &str,
    dialog: &Dialog,
    embedder: &dyn EmbeddingBackend,
) -> Result<Vec<usize>, MatchingError> {
    let normalized_table: Vec<String> = dialog.sentences.iter().map(|s| normalize(&s.text)).collect();
    let mut slots = Vec::new();
    for sentence in split_text_sentences(generated) {
        let norm = normalize(sentence);
        if norm.is_empty() {
            continue;
        }
        if let Some(found) = decompose_verbatim(sentence, &dialog.sentences) {
            slots.push(Slot::Matched(found));
        } else if let Some(pos) = normalized_table.iter().position(|t| *t == norm) {
            slots.push(Slot::Matched(vec![pos + 1]));
        } else {
            slots.push(Slot::Pending(sentence.to_string()));
        }
    }
    if slots.is_empty() {
        return Err(MatchingError::EmptyGeneration);
    }

    let pending: Vec<String> =
        slots.iter().filter_map(|s| if let Slot::Pending(t) = s { Some(t.clone()) } else { None }).collect();
    let mut resolved = Vec::with_capacity(pending.len());
    if !pending.is_empty() {
        let dialog_texts: Vec<String> = dialog.sentences.iter().map(|s| s.text.clone()).collect();
        let dialog_vectors = embedder.embed(&dialog_texts)?;
        let generated_vectors = embedder.embed(&pending)?;
        if dialog_vectors.len() != dialog_texts.len() || generated_vectors.len() != pending.len() {
            return Err(BackendError::Protocol("embedder returned the wrong number of vectors".into()).into());
        }
        for (text, vector) in pending.iter().zip(&generated_vectors) {
            resolved.push(nearest(text, vector, &dialog_vectors, dialog)?);
        }
    }

    let mut resolved = resolved.into_iter();
    let mut out = Vec::new();
    for slot in slots {
        match slot {
            Slot::Matched(found) => out.extend(found),
            Slot::Pending(_) => out.push(resolved.next().expect("one resolution per pending sentence")),
        }
    }
    Ok(out)
}

fn nearest(
    text: &str,
    vector: &EmbeddingVector,
    dialog_vectors: &[EmbeddingVector],
    dialog: &Dialog,
) -> Result<usize, MatchingError> {
    let mut best: Option<(usize, f64)> = None;
    if !vector.is_zero() {
        for (i, dv) in dialog_vectors.iter().enumerate() {
            let sim = match cosine_similarity(vector, dv) {
                Ok(s) => s,
                Err(MatchingError::ZeroVector) => continue,
                Err(e) => return Err(e),
            };
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((i + 1, sim));
            }
        }
    }
    match best {
        Some((idx, _)) => Ok(idx),
        None => Ok(best_overlap(&normalize(text), &dialog.sentences).map_or(1, |(idx, _)| idx)),
    }
}
