//! Blocking HTTP adapters for the wire protocol.
//!
//! Every logical request carries a client-generated `Idempotency-Key` that
//! stays fixed across retries. Transport failures, 429 and 5xx responses are
//! retried with bounded exponential backoff; the number of requests in flight
//! per adapter is capped.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{
    CompleteRequest, CompleteResponse, EmbedRequest, EmbedResponse, ErrorBody, SummarizeRequest, SummarizeResponse,
    TrainRequest, TrainResponse, COMPLETE_PATH, EMBED_PATH, SUMMARIZE_PATH, TRAIN_PATH,
};
use super::{
    check_embeddings, check_train_request, BackendError, CompletionBackend, CompletionResult, EmbeddingBackend,
    EmbeddingVector, ModelHandle, SummarizerBackend, TrainConfig, TrainExample,
};
use crate::prompting::{TokenCounter, WhitespaceEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 4, base_delay: Duration::from_millis(250), max_delay: Duration::from_secs(8) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): base * 2^attempt, capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    /// Sent as a bearer token.
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    /// Context window assumed for completion requests.
    pub token_limit: usize,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: None,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            token_limit: 4096,
        }
    }
}

struct Slots {
    free: Mutex<usize>,
    cond: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Slots { free: Mutex::new(n.max(1)), cond: Condvar::new() }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot mutex poisoned");
        while *free == 0 {
            free = self.cond.wait(free).expect("slot mutex poisoned");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot mutex poisoned") += 1;
        self.0.cond.notify_one();
    }
}

/// Client for one service base URL. Implements every backend role; use the
/// ones the service actually serves.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    slots: Slots,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let slots = Slots::new(config.max_in_flight);
        HttpBackend { config, agent, slots }
    }

    pub fn base_url(&self) -> &str {
        &self.config.base_url
    }

    fn post_once<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
        request_id: &str,
    ) -> Result<Resp, BackendError> {
        let _slot = self.slots.acquire();
        let url = format!("{}{}", self.config.base_url, path);
        let mut request =
            self.agent.post(&url).header("Idempotency-Key", request_id).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| BackendError::Transport(format!("{url}: {e}")))?;
        let status = response.status().as_u16();
        if (200..300).contains(&status) {
            return response.body_mut().read_json::<Resp>().map_err(|e| BackendError::Protocol(format!("{url}: {e}")));
        }
        let raw = response.body_mut().read_to_string().unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&raw).map(|b| b.error).unwrap_or(raw);
        Err(match status {
            429 => BackendError::RateLimited(message),
            503 => BackendError::Unavailable(message),
            _ => BackendError::Server { status, message },
        })
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
        retry_server_errors: bool,
    ) -> Result<Resp, BackendError> {
        let request_id = uuid::Uuid::new_v4().to_string();
        let policy = self.config.retry;
        let mut attempt = 0;
        loop {
            match self.post_once(path, body, &request_id) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    let retryable = match &e {
                        BackendError::Server { .. } => retry_server_errors && e.is_transient(),
                        _ => e.is_transient(),
                    };
                    attempt += 1;
                    if !retryable || attempt >= policy.max_attempts {
                        return Err(e);
                    }
                    log::warn!("{path} attempt {attempt} failed ({e}); retrying");
                    std::thread::sleep(policy.delay(attempt - 1));
                }
            }
        }
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &str, max_tokens: usize, want_logprobs: bool) -> Result<CompletionResult, BackendError> {
        let needed = WhitespaceEstimate.count(prompt) + max_tokens;
        if needed > self.config.token_limit {
            return Err(BackendError::TokenLimit { tokens: needed, limit: self.config.token_limit });
        }
        let request = CompleteRequest { prompt: prompt.to_string(), max_tokens, logprobs: want_logprobs };
        let response: CompleteResponse = self.post(COMPLETE_PATH, &request, true)?;
        let result = CompletionResult { text: response.text, tokens: response.tokens };
        if want_logprobs && result.tokens.is_empty() && !result.text.is_empty() {
            return Err(BackendError::MissingLogprobs);
        }
        result.validate()?;
        Ok(result)
    }

    fn token_limit(&self) -> usize {
        self.config.token_limit
    }
}

impl SummarizerBackend for HttpBackend {
    fn train(
        &self,
        examples: &[TrainExample],
        epochs: usize,
        config: &TrainConfig,
    ) -> Result<ModelHandle, BackendError> {
        check_train_request(examples, epochs)?;
        let request = TrainRequest {
            examples: examples.to_vec(),
            epochs,
            config: serde_json::to_value(config).expect("train config serializes"),
        };
        let response: TrainResponse = self.post(TRAIN_PATH, &request, false).map_err(|e| match e {
            BackendError::Server { status, message } if status >= 500 => BackendError::TrainingFailed(message),
            other => other,
        })?;
        Ok(ModelHandle {
            id: response.model_id,
            trained_on: examples.len(),
            epochs_completed: response.epochs_completed,
        })
    }

    fn summarize(&self, model: &ModelHandle, input: &str, max_tokens: usize) -> Result<String, BackendError> {
        let request = SummarizeRequest { model_id: model.id.clone(), input: input.to_string(), max_tokens };
        let response: SummarizeResponse = self.post(SUMMARIZE_PATH, &request, true).map_err(|e| match e {
            BackendError::Server { status: 404, .. } => BackendError::UnknownHandle(model.id.clone()),
            other => other,
        })?;
        Ok(response.text)
    }
}

impl EmbeddingBackend for HttpBackend {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        if sentences.is_empty() {
            return Err(BackendError::InvalidRequest("no sentences".into()));
        }
        let request = EmbedRequest { sentences: sentences.to_vec() };
        let response: EmbedResponse = self.post(EMBED_PATH, &request, true)?;
        let vectors: Vec<EmbeddingVector> = response.vectors.into_iter().map(EmbeddingVector::new).collect();
        check_embeddings(&vectors, sentences.len())?;
        if let Some(v) = vectors.iter().find(|v| v.dimension() != response.dim) {
            return Err(BackendError::DimensionMismatch { expected: response.dim, got: v.dimension() });
        }
        Ok(vectors)
    }
}
