//! Deterministic in-process backends for offline runs and tests.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{
    check_train_request, BackendError, CompletionBackend, CompletionResult, EmbeddingBackend, EmbeddingVector,
    ModelHandle, SummarizerBackend, TokenLogprob, TrainConfig, TrainExample,
};
use crate::corpus::{Dialog, ExtractiveSummary};
use crate::heuristics::long_1;
use crate::metrics::tokenize_for_rouge;
use crate::prompting::{split_by_role, TokenCounter, WhitespaceEstimate};
use crate::segment::render_numbered;

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn seed_for(seed: u64, text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(head)
}

/// How the noisy labeller corrupts an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    /// Replace with a different valid sentence number.
    InRange,
    /// Replace with a number past the end of the dialog.
    OutOfRange,
}

#[derive(Debug, Clone, Copy)]
struct Noise {
    rate: f64,
    mode: Corruption,
}

#[derive(Debug, Clone)]
struct Gold {
    customer: Vec<usize>,
    agent: Vec<usize>,
    n_sentences: usize,
}

/// Labeller that answers QA prompts with the gold indices registered for the
/// target dialog, optionally corrupting each index with probability `rate`.
/// Corrupted numbers get markedly lower log-probabilities than clean ones, so
/// confidence ranking prefers clean labels. Unregistered targets receive an
/// answer with no numbers.
pub struct StubLabeler {
    gold: HashMap<String, Gold>,
    seed: u64,
    noise: Option<Noise>,
    logprobs: bool,
    limit: usize,
    calls: AtomicUsize,
}

impl StubLabeler {
    pub fn oracle(seed: u64) -> Self {
        StubLabeler { gold: HashMap::new(), seed, noise: None, logprobs: true, limit: 4096, calls: AtomicUsize::new(0) }
    }

    pub fn noisy(seed: u64, rate: f64, mode: Corruption) -> Self {
        StubLabeler { noise: Some(Noise { rate: rate.clamp(0.0, 1.0), mode }), ..StubLabeler::oracle(seed) }
    }

    /// Makes the labeller refuse log-probability requests.
    pub fn without_logprobs(mut self) -> Self {
        self.logprobs = false;
        self
    }

    pub fn with_token_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn register(&mut self, dialog: &Dialog, gold: &ExtractiveSummary) {
        let (customer, agent) = split_by_role(dialog, &gold.indices);
        self.gold
            .insert(render_numbered(&dialog.sentences), Gold { customer, agent, n_sentences: dialog.n_sentences() });
    }

    pub fn registered(&self) -> usize {
        self.gold.len()
    }

    /// Number of `complete` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn lookup(&self, prompt: &str) -> Option<&Gold> {
        let body = prompt.trim_end();
        let body = body.strip_suffix("Customer:").unwrap_or(body).trim_end();
        self.gold
            .iter()
            .filter(|(rendered, _)| body.ends_with(rendered.as_str()))
            .max_by_key(|(rendered, _)| rendered.len())
            .map(|(_, g)| g)
    }

    fn answer(&self, gold: &Gold, rng: &mut ChaCha8Rng) -> Vec<(String, f64)> {
        let mut tokens = vec![("Customer".to_string(), -0.01), (":".to_string(), -0.001)];
        let role = |tokens: &mut Vec<(String, f64)>, indices: &[usize], rng: &mut ChaCha8Rng| {
            if indices.is_empty() {
                tokens.push((" none".into(), -0.05));
            }
            for (k, &idx) in indices.iter().enumerate() {
                if k > 0 {
                    tokens.push((",".into(), -0.01));
                }
                let corrupt = self.noise.is_some_and(|n| rng.random_bool(n.rate));
                let (value, logprob) = if corrupt {
                    let n = gold.n_sentences;
                    let value = match self.noise.map(|n| n.mode) {
                        Some(Corruption::OutOfRange) => n + 1 + rng.random_range(0..n.max(1)),
                        _ if n > 1 => {
                            let shifted = rng.random_range(1..n);
                            (idx - 1 + shifted) % n + 1
                        }
                        _ => idx,
                    };
                    (value, -(1.0 + 2.0 * rng.random::<f64>()))
                } else {
                    (idx, -(0.01 + 0.3 * rng.random::<f64>()))
                };
                tokens.push((format!(" {value}"), logprob));
            }
            tokens.push((".".into(), -0.01));
        };
        role(&mut tokens, &gold.customer, rng);
        tokens.push((" Agent".into(), -0.01));
        tokens.push((":".into(), -0.001));
        role(&mut tokens, &gold.agent, rng);
        tokens
    }
}

impl CompletionBackend for StubLabeler {
    fn complete(&self, prompt: &str, max_tokens: usize, want_logprobs: bool) -> Result<CompletionResult, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if want_logprobs && !self.logprobs {
            return Err(BackendError::MissingLogprobs);
        }
        let needed = WhitespaceEstimate.count(prompt) + max_tokens;
        if needed > self.limit {
            return Err(BackendError::TokenLimit { tokens: needed, limit: self.limit });
        }
        let pieces = match self.lookup(prompt) {
            Some(gold) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_for(self.seed, prompt));
                self.answer(gold, &mut rng)
            }
            None => vec![("Customer: none. Agent: none.".to_string(), -2.0)],
        };
        let text: String = pieces.iter().map(|p| p.0.as_str()).collect();
        let tokens = if want_logprobs {
            pieces.into_iter().map(|(text, logprob)| TokenLogprob { text, logprob }).collect()
        } else {
            Vec::new()
        };
        Ok(CompletionResult { text, tokens })
    }

    fn token_limit(&self) -> usize {
        self.limit
    }
}

/// Summarizer whose every "trained" model returns the LONG-1 summary of its
/// input. Handles are content-addressed, so equal training requests give equal
/// ids; handles from other instances are rejected.
#[derive(Default)]
pub struct HeuristicSummarizer {
    models: Mutex<BTreeSet<String>>,
}

impl HeuristicSummarizer {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SummarizerBackend for HeuristicSummarizer {
    fn train(
        &self,
        examples: &[TrainExample],
        epochs: usize,
        config: &TrainConfig,
    ) -> Result<ModelHandle, BackendError> {
        check_train_request(examples, epochs)?;
        let fingerprint = serde_json::to_vec(&(examples, epochs, config)).expect("train request serializes");
        let id = format!("long1-{}", &sha256_hex(&fingerprint)[..16]);
        self.models.lock().expect("model registry poisoned").insert(id.clone());
        Ok(ModelHandle { id, trained_on: examples.len(), epochs_completed: epochs })
    }

    fn summarize(&self, model: &ModelHandle, input: &str, max_tokens: usize) -> Result<String, BackendError> {
        if !self.models.lock().expect("model registry poisoned").contains(&model.id) {
            return Err(BackendError::UnknownHandle(model.id.clone()));
        }
        if input.trim().is_empty() {
            return Ok(String::new());
        }
        let dialog =
            Dialog::from_source_text("input", input).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let summary = long_1(&dialog).text;
        let words: Vec<&str> = summary.split_whitespace().collect();
        Ok(if words.len() > max_tokens { words[..max_tokens].join(" ") } else { summary })
    }
}

/// TF-IDF bag-of-words embedder over a fixed vocabulary fitted on a corpus.
/// Terms outside the vocabulary are ignored, so such sentences may embed to
/// the zero vector.
#[derive(Debug, Clone)]
pub struct TfIdfEmbedder {
    vocab: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdfEmbedder {
    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`.
    pub fn fit<S: AsRef<str>>(corpus: &[S]) -> Result<Self, BackendError> {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let unique: BTreeSet<String> = tokenize_for_rouge(doc.as_ref()).into_iter().collect();
            for t in unique {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        if df.is_empty() {
            return Err(BackendError::InvalidRequest("TF-IDF corpus has no tokens".into()));
        }
        let n = corpus.len() as f64;
        let mut vocab = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, count)) in df.into_iter().enumerate() {
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
            vocab.insert(term, i);
        }
        Ok(TfIdfEmbedder { vocab, idf })
    }

    pub fn dimension(&self) -> usize {
        self.idf.len()
    }

    fn vector(&self, sentence: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.idf.len()];
        for t in tokenize_for_rouge(sentence) {
            if let Some(&i) = self.vocab.get(&t) {
                values[i] += self.idf[i];
            }
        }
        EmbeddingVector::new(values)
    }
}

impl EmbeddingBackend for TfIdfEmbedder {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        if sentences.is_empty() {
            return Err(BackendError::InvalidRequest("no sentences".into()));
        }
        Ok(sentences.iter().map(|s| self.vector(s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Speaker;
    use crate::matching::cosine_similarity;
    use crate::prompting::{build_qa_prompt, parse_qa_answer, PromptBudget, PromptTemplates};

    fn toy() -> Dialog {
        Dialog::from_turns(
            "T1",
            vec![
                (Speaker::Customer, "Hi, my order 123 never arrived. Can you help?"),
                (Speaker::Agent, "Sorry about that. I have issued a refund."),
            ],
        )
        .unwrap()
    }

    fn prompt_for(d: &Dialog) -> String {
        let budget = PromptBudget::new(4096, 64, 0).unwrap();
        build_qa_prompt(d, &[], &budget, &PromptTemplates::default(), &WhitespaceEstimate).unwrap().text
    }

    #[test]
    fn oracle_echoes_gold() {
        let d = toy();
        let mut labeler = StubLabeler::oracle(3);
        labeler.register(&d, &ExtractiveSummary::from_indices(&d, vec![1, 4]).unwrap());
        let c = labeler.complete(&prompt_for(&d), 64, true).unwrap();
        assert_eq!(c.text, "Customer: 1. Agent: 4.");
        c.validate().unwrap();
        let parsed = parse_qa_answer(&c, 4).unwrap();
        assert_eq!(parsed.number_token_spans.len(), 2);
        assert_eq!(labeler.calls(), 1);
        assert_eq!(labeler.complete(&prompt_for(&d), 64, true).unwrap(), c);
    }

    #[test]
    fn labeler_errors() {
        let d = toy();
        let labeler = StubLabeler::oracle(3).with_token_limit(20);
        assert!(matches!(labeler.complete(&prompt_for(&d), 64, true), Err(BackendError::TokenLimit { .. })));
        let labeler = StubLabeler::oracle(3).without_logprobs();
        assert_eq!(labeler.complete("x", 5, true).unwrap_err(), BackendError::MissingLogprobs);
        assert!(labeler.complete("x", 5, false).unwrap().tokens.is_empty());
    }

    #[test]
    fn noisy_out_of_range_corruption() {
        let d = toy();
        let mut labeler = StubLabeler::noisy(1, 1.0, Corruption::OutOfRange);
        labeler.register(&d, &ExtractiveSummary::from_indices(&d, vec![1, 4]).unwrap());
        let c = labeler.complete(&prompt_for(&d), 64, true).unwrap();
        assert!(parse_qa_answer(&c, 4).is_err());
    }

    #[test]
    fn noisy_in_range_corruption_lowers_confidence() {
        let d = toy();
        let gold = ExtractiveSummary::from_indices(&d, vec![1, 4]).unwrap();
        let mut clean = StubLabeler::oracle(1);
        clean.register(&d, &gold);
        let mut noisy = StubLabeler::noisy(1, 1.0, Corruption::InRange);
        noisy.register(&d, &gold);
        let a = parse_qa_answer(&clean.complete(&prompt_for(&d), 64, true).unwrap(), 4).unwrap();
        let b = parse_qa_answer(&noisy.complete(&prompt_for(&d), 64, true).unwrap(), 4).unwrap();
        assert_ne!((b.customer_indices.clone(), b.agent_indices.clone()), (vec![1], vec![4]));
        let sum = |p: &crate::prompting::ParsedAnswer| p.number_token_spans.iter().map(|s| s.logprob).sum::<f64>();
        assert!(sum(&b) < sum(&a));
    }

    #[test]
    fn heuristic_summarizer() {
        let s = HeuristicSummarizer::new();
        let ex = vec![TrainExample { input: "a".into(), target: "b".into() }];
        let h = s.train(&ex, 10, &TrainConfig::default()).unwrap();
        assert_eq!(h.epochs_completed, 10);
        assert_eq!(h, s.train(&ex, 10, &TrainConfig::default()).unwrap());
        assert_eq!(
            s.summarize(&h, &toy().source_text(), 80).unwrap(),
            "Hi, my order 123 never arrived. I have issued a refund."
        );
        assert_eq!(s.summarize(&h, "", 80).unwrap(), "");
        let other = HeuristicSummarizer::new();
        assert!(matches!(other.summarize(&h, "Customer: hi", 80), Err(BackendError::UnknownHandle(_))));
        assert!(matches!(s.train(&[], 10, &TrainConfig::default()), Err(BackendError::InvalidRequest(_))));
        assert!(s.train(&ex, 0, &TrainConfig::default()).is_err());
    }

    #[test]
    fn tfidf_embedder() {
        let d = toy();
        let corpus: Vec<&str> = d.sentences.iter().map(|s| s.text.as_str()).collect();
        let e = TfIdfEmbedder::fit(&corpus).unwrap();
        let v = e.embed(&["Can you help?".into(), "Can you help?".into()]).unwrap();
        assert_eq!(v[0], v[1]);
        let v = e.embed(&["a".into(), "b".into()]).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].dimension(), v[1].dimension());
        let v = e.embed(&["Can you help?".into(), "Sorry about that.".into()]).unwrap();
        assert_eq!(cosine_similarity(&v[0], &v[1]).unwrap(), 0.0);
        assert!(e.embed(&[]).is_err());
        assert!(TfIdfEmbedder::fit(&["!!!"]).is_err());
    }
}
