//! JSON wire protocol shared by the HTTP adapters and any remote service.
//!
//! | Endpoint            | Request                                         | Response                               |
//! |---------------------|-------------------------------------------------|----------------------------------------|
//! | `POST /v1/complete` | `{"prompt", "max_tokens", "logprobs"}`          | `{"text", "tokens": [{"text", "logprob"}]}` |
//! | `POST /v1/train`    | `{"examples": [{"input", "target"}], "epochs", "config"}` | `{"model_id", "epochs_completed"}` |
//! | `POST /v1/summarize`| `{"model_id", "input", "max_tokens"}`           | `{"text"}`                             |
//! | `POST /v1/embed`    | `{"sentences": [..]}`                           | `{"vectors": [[..]], "dim"}`           |
//!
//! Non-2xx responses carry `{"error": str}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{TokenLogprob, TrainExample};

pub const COMPLETE_PATH: &str = "/v1/complete";
pub const TRAIN_PATH: &str = "/v1/train";
pub const SUMMARIZE_PATH: &str = "/v1/summarize";
pub const EMBED_PATH: &str = "/v1/embed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub logprobs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteResponse {
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<TokenLogprob>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    pub examples: Vec<TrainExample>,
    pub epochs: usize,
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub model_id: String,
    pub epochs_completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarizeRequest {
    pub model_id: String,
    pub input: String,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedRequest {
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// One request/response exchange a conforming service must reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireFixture {
    pub name: String,
    pub method: String,
    pub path: String,
    pub request: Value,
    pub status: u16,
    pub response: Value,
}

fn fixture(name: &str, path: &str, request: Value, status: u16, response: Value) -> WireFixture {
    WireFixture { name: name.into(), method: "POST".into(), path: path.into(), request, status, response }
}

/// The conformance fixtures. Response values for success cases fix the
/// schema (field names and types); services are not expected to reproduce
/// generated text or vector values.
pub fn fixtures() -> Vec<WireFixture> {
    vec![
        fixture(
            "complete_with_logprobs",
            COMPLETE_PATH,
            json!({"prompt": "1) Hi.\nCustomer:", "max_tokens": 64, "logprobs": true}),
            200,
            json!({"text": " 1. Agent: none.", "tokens": [
                {"text": " 1", "logprob": -0.01}, {"text": ".", "logprob": -0.02},
                {"text": " Agent", "logprob": -0.01}, {"text": ":", "logprob": 0.0},
                {"text": " none", "logprob": -0.3}, {"text": ".", "logprob": -0.01}
            ]}),
        ),
        fixture(
            "train_two_examples",
            TRAIN_PATH,
            json!({"examples": [
                {"input": "Customer: My screen broke.\nAgent: We will replace it.", "target": "My screen broke. We will replace it."},
                {"input": "Customer: Where is my order?\nAgent: It ships today.", "target": "Where is my order? It ships today."}
            ], "epochs": 10, "config": {}}),
            200,
            json!({"model_id": "model-0001", "epochs_completed": 10}),
        ),
        fixture(
            "train_empty_examples",
            TRAIN_PATH,
            json!({"examples": [], "epochs": 10, "config": {}}),
            422,
            json!({"error": "no training examples"}),
        ),
        fixture(
            "summarize_known_model",
            SUMMARIZE_PATH,
            json!({"model_id": "model-0001", "input": "Customer: My screen broke.\nAgent: We will replace it.", "max_tokens": 80}),
            200,
            json!({"text": "My screen broke. We will replace it."}),
        ),
        fixture(
            "summarize_unknown_model",
            SUMMARIZE_PATH,
            json!({"model_id": "missing", "input": "Customer: Hi.", "max_tokens": 80}),
            404,
            json!({"error": "unknown model missing"}),
        ),
        fixture(
            "embed_two_sentences",
            EMBED_PATH,
            json!({"sentences": ["My screen broke.", "We will replace it."]}),
            200,
            json!({"vectors": [[0.6, 0.8, 0.0], [0.0, 0.6, 0.8]], "dim": 3}),
        ),
        fixture("embed_empty", EMBED_PATH, json!({"sentences": []}), 422, json!({"error": "no sentences"})),
    ]
}

/// Checks that a fixture's request and response decode into the typed
/// protocol structs.
pub fn check_fixture(f: &WireFixture) -> Result<(), String> {
    fn decode<T: serde::de::DeserializeOwned>(v: &Value, what: &str) -> Result<(), String> {
        serde_json::from_value::<T>(v.clone()).map(|_| ()).map_err(|e| format!("{what}: {e}"))
    }
    match f.path.as_str() {
        COMPLETE_PATH => decode::<CompleteRequest>(&f.request, "request")?,
        TRAIN_PATH => decode::<TrainRequest>(&f.request, "request")?,
        SUMMARIZE_PATH => decode::<SummarizeRequest>(&f.request, "request")?,
        EMBED_PATH => decode::<EmbedRequest>(&f.request, "request")?,
        other => return Err(format!("unknown path {other}")),
    }
    if !(200..300).contains(&f.status) {
        return decode::<ErrorBody>(&f.response, "error body");
    }
    match f.path.as_str() {
        COMPLETE_PATH => decode::<CompleteResponse>(&f.response, "response"),
        TRAIN_PATH => decode::<TrainResponse>(&f.response, "response"),
        SUMMARIZE_PATH => decode::<SummarizeResponse>(&f.response, "response"),
        _ => {
            let r: EmbedResponse = serde_json::from_value(f.response.clone()).map_err(|e| format!("response: {e}"))?;
            if r.vectors.iter().any(|v| v.len() != r.dim) {
                return Err("vector length differs from dim".into());
            }
            Ok(())
        }
    }
}

/// Writes one `<name>.json` per fixture into `dir`.
pub fn write_fixtures(dir: &Path) -> std::io::Result<usize> {
    std::fs::create_dir_all(dir)?;
    let all = fixtures();
    for f in &all {
        let body = serde_json::to_string_pretty(f).expect("fixtures serialize");
        std::fs::write(dir.join(format!("{}.json", f.name)), body + "\n")?;
    }
    Ok(all.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_decode() {
        for f in fixtures() {
            check_fixture(&f).unwrap_or_else(|e| panic!("{}: {e}", f.name));
        }
    }

    #[test]
    fn unknown_request_fields_rejected() {
        let mut f = fixtures().remove(0);
        f.request["temperature"] = json!(0.7);
        assert!(check_fixture(&f).is_err());
    }

    #[test]
    fn fixtures_written_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let n = write_fixtures(dir.path()).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), n);
        let text = std::fs::read_to_string(dir.path().join("embed_empty.json")).unwrap();
        let back: WireFixture = serde_json::from_str(&text).unwrap();
        assert_eq!(back.status, 422);
    }
}
