//! Model roles behind narrow traits: a completion model with per-token
//! log-probabilities (the pseudo-labeller), a trainable summarizer, and a
//! sentence embedder. Each role has a deterministic in-process stub and an
//! HTTP adapter speaking the JSON protocol in [`wire`].

mod cache;
mod http;
mod stub;
pub mod wire;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::PseudoLabelCache;
pub use http::{HttpBackend, HttpConfig, RetryPolicy};
pub(crate) use stub::sha256_hex;
pub use stub::{Corruption, HeuristicSummarizer, StubLabeler, TfIdfEmbedder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by backend: {0}")]
    RateLimited(String),
    #[error("prompt needs {tokens} tokens, backend limit is {limit}")]
    TokenLimit { tokens: usize, limit: usize },
    #[error("backend cannot return log-probabilities")]
    MissingLogprobs,
    #[error("unknown model handle {0}")]
    UnknownHandle(String),
    #[error("training failed: {0}")]
    TrainingFailed(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("backend returned HTTP {status}: {message}")]
    Server { status: u16, message: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
}

impl BackendError {
    /// Worth retrying with backoff.
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport(_) | BackendError::RateLimited(_) | BackendError::Unavailable(_))
            || matches!(self, BackendError::Server { status, .. } if *status >= 500)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub text: String,
    pub logprob: f64,
}

/// Completion text and its tokens; token texts concatenate to `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub tokens: Vec<TokenLogprob>,
}

impl CompletionResult {
    pub fn validate(&self) -> Result<(), BackendError> {
        let joined: String = self.tokens.iter().map(|t| t.text.as_str()).collect();
        if !self.tokens.is_empty() && joined != self.text {
            return Err(BackendError::Protocol("token texts do not concatenate to the completion".into()));
        }
        if let Some(t) = self.tokens.iter().find(|t| !t.logprob.is_finite() || t.logprob > 0.0) {
            return Err(BackendError::Protocol(format!("invalid logprob {} for token {:?}", t.logprob, t.text)));
        }
        Ok(())
    }
}

/// Opaque reference to a trained summarizer held by a backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub id: String,
    pub trained_on: usize,
    pub epochs_completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// One summarizer training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub input: String,
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Continue from this model instead of the base model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Completion model used as the weak labeller.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str, max_tokens: usize, want_logprobs: bool) -> Result<CompletionResult, BackendError>;

    /// Context window in tokens.
    fn token_limit(&self) -> usize {
        4096
    }

    /// Exact prompt token count when the backend exposes its tokenizer.
    fn count_tokens(&self, _text: &str) -> Option<usize> {
        None
    }
}

/// Trainable sequence-to-sequence summarizer. Training minimises token-level
/// negative log-likelihood of each target given its input, summed over every
/// example passed in (labeled and pseudo-labeled alike).
pub trait SummarizerBackend: Send + Sync {
    fn train(
        &self,
        examples: &[TrainExample],
        epochs: usize,
        config: &TrainConfig,
    ) -> Result<ModelHandle, BackendError>;
    fn summarize(&self, model: &ModelHandle, input: &str, max_tokens: usize) -> Result<String, BackendError>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, BackendError>;
}

/// Counter that prefers the backend tokenizer and falls back to the
/// whitespace estimate.
pub struct BackendTokenCounter<'a>(pub &'a dyn CompletionBackend);

impl crate::prompting::TokenCounter for BackendTokenCounter<'_> {
    fn count(&self, text: &str) -> usize {
        self.0.count_tokens(text).unwrap_or_else(|| crate::prompting::WhitespaceEstimate.count(text))
    }
}

pub(crate) fn check_train_request(examples: &[TrainExample], epochs: usize) -> Result<(), BackendError> {
    if examples.is_empty() {
        return Err(BackendError::InvalidRequest("no training examples".into()));
    }
    if epochs == 0 {
        return Err(BackendError::InvalidRequest("epochs must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn check_embeddings(vectors: &[EmbeddingVector], expected_len: usize) -> Result<(), BackendError> {
    if vectors.len() != expected_len {
        return Err(BackendError::Protocol(format!("{} vectors for {expected_len} sentences", vectors.len())));
    }
    if let Some(first) = vectors.first() {
        let dim = first.dimension();
        if dim == 0 {
            return Err(BackendError::DimensionMismatch { expected: 1, got: 0 });
        }
        if let Some(v) = vectors.iter().find(|v| v.dimension() != dim) {
            return Err(BackendError::DimensionMismatch { expected: dim, got: v.dimension() });
        }
        if vectors.iter().any(|v| v.values.iter().any(|x| !x.is_finite())) {
            return Err(BackendError::Protocol("non-finite embedding value".into()));
        }
    }
    Ok(())
}
