//! ROUGE-1, ROUGE-2 and ROUGE-L F-measure.
//!
//! Tokens are lowercased alphanumeric runs. ROUGE-L is the whole-sequence LCS
//! score with beta = 1. Candidates are truncated to a token budget before
//! scoring; references never are. With several references per instance the
//! best F1 per metric is kept, then averaged over instances.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ExtractiveSummary;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{predictions} predictions but {references} reference lists")]
    LengthMismatch { predictions: usize, references: usize },
    #[error("instance {0} has no references")]
    EmptyReferences(usize),
    #[error("token limit must be positive")]
    ZeroTokenLimit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(overlap: usize, candidate_len: usize, reference_len: usize) -> Self {
        let precision = if candidate_len == 0 { 0.0 } else { overlap as f64 / candidate_len as f64 };
        let recall = if reference_len == 0 { 0.0 } else { overlap as f64 / reference_len as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        RougeScore { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RougeConfig {
    /// Apply the English Snowball stemmer to tokens.
    pub stem: bool,
}

/// Lowercase, split on non-alphanumeric characters, drop empty tokens.
pub fn tokenize_for_rouge(text: &str) -> Vec<String> {
    text.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

fn tokenize_with(text: &str, config: RougeConfig) -> Vec<String> {
    let tokens = tokenize_for_rouge(text);
    if !config.stem {
        return tokens;
    }
    let stemmer = rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English);
    tokens.into_iter().map(|t| stemmer.stem(&t).into_owned()).collect()
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. Panics if `n == 0`.
pub fn rouge_n<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n requires n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap: usize = cand.iter().map(|(g, c)| refs.get(g).map_or(0, |r| (*c).min(*r))).sum();
    let total = |len: usize| len.saturating_sub(n - 1);
    RougeScore::from_counts(overlap, total(candidate.len()), total(reference.len()))
}

pub fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    #[serde(rename = "rougeL")]
    pub rouge_l: RougeScore,
}

/// Scores one candidate text against one reference text.
pub fn score_pair(candidate: &str, reference: &str, token_limit: usize, config: RougeConfig) -> InstanceScore {
    let mut cand = tokenize_with(candidate, config);
    cand.truncate(token_limit);
    let reference = tokenize_with(reference, config);
    InstanceScore {
        rouge1: rouge_n(&cand, &reference, 1),
        rouge2: rouge_n(&cand, &reference, 2),
        rouge_l: rouge_l(&cand, &reference),
    }
}

/// Corpus-level report. Serializes as
/// `{"rouge1", "rouge2", "rougeL", "n", "token_limit", "aggregation", "per_instance"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub n: usize,
    pub token_limit: usize,
    pub aggregation: String,
    pub per_instance: Vec<InstanceScore>,
}

impl EvalReport {
    /// F1 values scaled to percentage points, in R-1, R-2, R-L order.
    pub fn percentages(&self) -> [f64; 3] {
        [self.rouge1 * 100.0, self.rouge2 * 100.0, self.rouge_l * 100.0]
    }
}

fn best(scores: impl Iterator<Item = RougeScore>) -> RougeScore {
    scores
        .fold(None, |acc: Option<RougeScore>, s| match acc {
            Some(a) if a.f1 >= s.f1 => Some(a),
            _ => Some(s),
        })
        .unwrap_or_default()
}

/// Evaluates raw candidate texts against reference texts.
pub fn evaluate_texts<S: AsRef<str>>(
    predictions: &[S],
    references: &[Vec<S>],
    token_limit: usize,
    config: RougeConfig,
) -> Result<EvalReport, MetricsError> {
    if predictions.len() != references.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), references: references.len() });
    }
    if token_limit == 0 {
        return Err(MetricsError::ZeroTokenLimit);
    }
    let mut per_instance = Vec::with_capacity(predictions.len());
    for (i, (pred, refs)) in predictions.iter().zip(references).enumerate() {
        if refs.is_empty() {
            return Err(MetricsError::EmptyReferences(i));
        }
        let pairs: Vec<InstanceScore> =
            refs.iter().map(|r| score_pair(pred.as_ref(), r.as_ref(), token_limit, config)).collect();
        per_instance.push(InstanceScore {
            rouge1: best(pairs.iter().map(|p| p.rouge1)),
            rouge2: best(pairs.iter().map(|p| p.rouge2)),
            rouge_l: best(pairs.iter().map(|p| p.rouge_l)),
        });
    }
    let n = per_instance.len();
    let mean = |f: fn(&InstanceScore) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_instance.iter().map(f).sum::<f64>() / n as f64
        }
    };
    Ok(EvalReport {
        rouge1: mean(|s| s.rouge1.f1),
        rouge2: mean(|s| s.rouge2.f1),
        rouge_l: mean(|s| s.rouge_l.f1),
        n,
        token_limit,
        aggregation: "max".into(),
        per_instance,
    })
}

pub fn evaluate(
    predictions: &[ExtractiveSummary],
    references: &[Vec<ExtractiveSummary>],
    token_limit: usize,
    config: RougeConfig,
) -> Result<EvalReport, MetricsError> {
    let preds: Vec<&str> = predictions.iter().map(|p| p.text.as_str()).collect();
    let refs: Vec<Vec<&str>> = references.iter().map(|rs| rs.iter().map(|r| r.text.as_str()).collect()).collect();
    evaluate_texts(&preds, &refs, token_limit, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_for_rouge(s)
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(toks("The cat, sat!"), ["the", "cat", "sat"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("Order #123 OK"), ["order", "123", "ok"]);
    }

    #[test]
    fn rouge_n_examples() {
        let c = toks("the cat sat");
        let r = toks("the cat ran");
        let s1 = rouge_n(&c, &r, 1);
        assert_eq!((s1.precision, s1.recall), (2.0 / 3.0, 2.0 / 3.0));
        assert!((s1.f1 - 0.6667).abs() < 1e-4);
        let s2 = rouge_n(&c, &r, 2);
        assert_eq!((s2.precision, s2.recall, s2.f1), (0.5, 0.5, 0.5));
        for n in 1..=3 {
            assert_eq!(rouge_n(&c, &c, n).f1, 1.0);
        }
    }

    #[test]
    fn rouge_n_clips_repeats() {
        let s = rouge_n(&toks("the the the"), &toks("the cat"), 1);
        assert_eq!(s.precision, 1.0 / 3.0);
        assert_eq!(s.recall, 0.5);
    }

    #[test]
    fn rouge_l_examples() {
        let c = toks("the cat sat");
        let r = toks("the cat ran");
        assert_eq!(lcs_len(&c, &r), 2);
        assert!((rouge_l(&c, &r).f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rouge_l(&toks("a b"), &toks("c d")).f1, 0.0);
        let sup = toks("x the y cat z ran");
        assert_eq!(rouge_l(&sup, &r).recall, 1.0);
    }

    #[test]
    fn empty_inputs_score_zero() {
        let e: Vec<String> = vec![];
        assert_eq!(rouge_n(&e, &e, 1), RougeScore::default());
        assert_eq!(rouge_l(&e, &toks("a")), RougeScore::default());
        assert_eq!(rouge_n(&toks("a"), &toks("a"), 2).f1, 0.0);
    }

    #[test]
    fn evaluate_identity_and_max_aggregation() {
        let report = evaluate_texts(&["the cat sat"], &[vec!["the cat sat"]], 80, RougeConfig::default()).unwrap();
        assert_eq!(report.percentages(), [100.0, 100.0, 100.0]);
        let report =
            evaluate_texts(&["dogs bark loudly"], &[vec!["cats meow", "dogs bark loudly"]], 80, RougeConfig::default())
                .unwrap();
        assert_eq!((report.rouge1, report.rouge2, report.rouge_l), (1.0, 1.0, 1.0));
    }

    #[test]
    fn evaluate_truncates_candidate_only() {
        let words: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        let candidate = words.join(" ");
        let reference = words[..80].join(" ");
        let report =
            evaluate_texts(&[candidate.as_str()], &[vec![reference.as_str()]], 80, RougeConfig::default()).unwrap();
        assert_eq!(report.rouge1, 1.0);
        let long_ref =
            evaluate_texts(&[reference.as_str()], &[vec![candidate.as_str()]], 80, RougeConfig::default()).unwrap();
        assert_eq!(long_ref.per_instance[0].rouge1.recall, 0.8);
    }

    #[test]
    fn evaluate_errors() {
        let cfg = RougeConfig::default();
        assert_eq!(
            evaluate_texts(&["a"], &[], 80, cfg).unwrap_err(),
            MetricsError::LengthMismatch { predictions: 1, references: 0 }
        );
        assert_eq!(evaluate_texts(&["a"], &[vec![]], 80, cfg).unwrap_err(), MetricsError::EmptyReferences(0));
        assert_eq!(evaluate_texts(&["a"], &[vec!["a"]], 0, cfg).unwrap_err(), MetricsError::ZeroTokenLimit);
    }

    #[test]
    fn stemming_flag() {
        let cfg = RougeConfig { stem: true };
        assert_eq!(score_pair("running dogs", "run dog", 80, cfg).rouge1.f1, 1.0);
        assert!(score_pair("running dogs", "run dog", 80, RougeConfig::default()).rouge1.f1 < 1.0);
    }

    #[test]
    fn report_json_shape() {
        let report = evaluate_texts(&["a b"], &[vec!["a b"]], 80, RougeConfig::default()).unwrap();
        let v = serde_json::to_value(&report).unwrap();
        for key in ["rouge1", "rouge2", "rougeL", "n", "token_limit", "aggregation", "per_instance"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["aggregation"], "max");
    }
}
