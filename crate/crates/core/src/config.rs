//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! mode = llm-qa
//! cycles = 10
//! labeler_url = https://labeler.example/
//! trainer_url = stub:long1
//! ```
//!
//! Later assignments override earlier ones, so command-line overrides are
//! applied after the file. Credentials never live here: the labeller API key
//! is read from the `LABELER_API_KEY` environment variable.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::Corruption;
use crate::corpus::DatasetFormat;
use crate::orchestrator::{CycleConfig, Mode};

pub const API_KEY_ENV: &str = "LABELER_API_KEY";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{source_name}:{line}: expected key = value")]
    Syntax { source_name: String, line: usize },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {message}")]
    InvalidValue { key: String, value: String, message: String },
    #[error("{0} must not be stored in configuration; set the {API_KEY_ENV} environment variable instead")]
    SecretInConfig(String),
    #[error("{key} is required {reason}")]
    Missing { key: &'static str, reason: &'static str },
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

/// Where a model role is served from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BackendSpec {
    /// Oracle labeller answering with the dataset's reference summaries.
    StubOracle,
    StubNoisy {
        rate: f64,
        mode: StubCorruption,
    },
    /// Summarizer that always returns the LONG-1 summary.
    StubLong1,
    /// TF-IDF embedder fitted on the dataset's sentences.
    StubTfIdf,
    Http(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StubCorruption {
    InRange,
    OutOfRange,
}

impl From<StubCorruption> for Corruption {
    fn from(c: StubCorruption) -> Self {
        match c {
            StubCorruption::InRange => Corruption::InRange,
            StubCorruption::OutOfRange => Corruption::OutOfRange,
        }
    }
}

impl BackendSpec {
    /// Parses `stub:oracle`, `stub:noisy:<rate>[:out]`, `stub:long1`,
    /// `stub:tfidf` or an `http(s)://` base URL.
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(BackendSpec::Http(s.trim_end_matches('/').to_string()));
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["stub", "oracle"] => Ok(BackendSpec::StubOracle),
            ["stub", "long1"] => Ok(BackendSpec::StubLong1),
            ["stub", "tfidf"] => Ok(BackendSpec::StubTfIdf),
            ["stub", "noisy", rate, rest @ ..] => {
                let rate: f64 = rate.parse().map_err(|_| format!("bad corruption rate {rate:?}"))?;
                if !(0.0..=1.0).contains(&rate) {
                    return Err(format!("corruption rate {rate} outside [0, 1]"));
                }
                let mode = match rest {
                    [] | ["in"] => StubCorruption::InRange,
                    ["out"] => StubCorruption::OutOfRange,
                    _ => return Err(format!("bad noisy stub spec {s:?}")),
                };
                Ok(BackendSpec::StubNoisy { rate, mode })
            }
            _ => Err(format!("unsupported backend {s:?} (expected http(s)://..., stub:oracle, stub:noisy:<rate>, stub:long1 or stub:tfidf)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cycle: CycleConfig,
    pub labeler_url: Option<String>,
    pub trainer_url: Option<String>,
    pub embedder_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub dataset_format: DatasetFormat,
    pub timeout: Duration,
    pub max_attempts: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cycle: CycleConfig::default(),
            labeler_url: None,
            trainer_url: None,
            embedder_url: None,
            cache_dir: None,
            run_dir: None,
            dataset: None,
            dataset_format: DatasetFormat::CanonicalJsonl,
            timeout: Duration::from_secs(120),
            max_attempts: 4,
        }
    }
}

/// Splits config text into `(key, value)` pairs. Values may be wrapped in
/// double quotes.
pub fn parse_pairs(text: &str, source_name: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { source_name: source_name.to_string(), line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { source_name: source_name.to_string(), line: i + 1 });
        }
        let value = value.trim();
        let value = value.strip_prefix('"').and_then(|v| v.strip_suffix('"')).unwrap_or(value);
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        message: e.to_string(),
    })
}

fn non_empty(value: &str) -> Option<String> {
    if value.is_empty() {
        None
    } else {
        Some(value.to_string())
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let c = &mut self.cycle;
        match key {
            "mode" => c.mode = parse_value::<Mode>(key, value)?,
            "cycles" => c.cycles = parse_value(key, value)?,
            "k_per_cycle" | "k" => c.k_per_cycle = parse_value(key, value)?,
            "epochs_per_cycle" | "epochs" => c.epochs_per_cycle = parse_value(key, value)?,
            "seed" => c.seed = parse_value(key, value)?,
            "fraction" => c.fraction = parse_value(key, value)?,
            "token_limit" => c.token_limit = parse_value(key, value)?,
            "shots" => c.shots = parse_value(key, value)?,
            "selection" => c.selection = Some(parse_value(key, value)?),
            "max_total_tokens" => c.max_total_tokens = parse_value(key, value)?,
            "max_answer_tokens" => c.max_answer_tokens = parse_value(key, value)?,
            "normalize_score" => c.normalize_score = parse_value(key, value)?,
            "continue_training" => c.continue_training = parse_value(key, value)?,
            "regenerate" => c.regenerate = parse_value(key, value)?,
            "failure_threshold" => c.failure_threshold = parse_value(key, value)?,
            "max_in_flight" => c.max_in_flight = parse_value(key, value)?,
            "stem" => c.stem = parse_value(key, value)?,
            "qa_instruction" => c.templates.qa_instruction = value.to_string(),
            "completion_instruction" => c.templates.completion_instruction = value.to_string(),
            "labeler_url" => self.labeler_url = non_empty(value),
            "trainer_url" => self.trainer_url = non_empty(value),
            "embedder_url" => self.embedder_url = non_empty(value),
            "cache_dir" => self.cache_dir = non_empty(value).map(PathBuf::from),
            "run_dir" => self.run_dir = non_empty(value).map(PathBuf::from),
            "dataset" => self.dataset = non_empty(value).map(PathBuf::from),
            "dataset_format" => {
                self.dataset_format = value.parse().map_err(|e: crate::corpus::CorpusError| {
                    ConfigError::InvalidValue { key: key.into(), value: value.into(), message: e.to_string() }
                })?
            }
            "timeout_secs" => self.timeout = Duration::from_secs(parse_value(key, value)?),
            "max_attempts" => self.max_attempts = parse_value(key, value)?,
            other => {
                let lower = other.to_ascii_lowercase();
                if ["key", "token", "secret", "password"].iter().any(|s| lower.contains(s)) {
                    return Err(ConfigError::SecretInConfig(other.to_string()));
                }
                return Err(ConfigError::UnknownKey(other.to_string()));
            }
        }
        Ok(())
    }

    /// Applies pairs in order; later keys win.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<(), ConfigError> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    /// Reads `path` (if given), then applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
            config.apply(&parse_pairs(&text, &path.display().to_string())?)?;
        }
        config.apply(overrides)?;
        Ok(config)
    }

    fn spec(key: &'static str, url: &Option<String>, reason: &'static str) -> Result<BackendSpec, ConfigError> {
        let url = url.as_deref().ok_or(ConfigError::Missing { key, reason })?;
        BackendSpec::parse(url).map_err(|message| ConfigError::InvalidValue {
            key: key.to_string(),
            value: url.to_string(),
            message,
        })
    }

    /// The labeller backend; present only in llm-qa mode.
    pub fn labeler_spec(&self) -> Result<Option<BackendSpec>, ConfigError> {
        if self.cycle.mode != Mode::LlmQa {
            return Ok(None);
        }
        Self::spec("labeler_url", &self.labeler_url, "in llm-qa mode").map(Some)
    }

    pub fn trainer_spec(&self) -> Result<BackendSpec, ConfigError> {
        Self::spec("trainer_url", &self.trainer_url, "for every run")
    }

    pub fn embedder_spec(&self) -> Result<BackendSpec, ConfigError> {
        Self::spec("embedder_url", &self.embedder_url, "for every run")
    }

    /// Checks the cycle settings and that every needed backend is named.
    pub fn validate(&self) -> Result<(), String> {
        self.cycle.validate().map_err(|e| e.to_string())?;
        self.labeler_spec().map_err(|e| e.to_string())?;
        self.trainer_spec().map_err(|e| e.to_string())?;
        self.embedder_spec().map_err(|e| e.to_string())?;
        if self.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::Selection;

    #[test]
    fn parses_file_and_overrides() {
        let text = "# run\nmode = long1-iter\ncycles=3\n\nk_per_cycle = 8\ntrainer_url = \"stub:long1\"\n";
        let mut config = RunConfig::default();
        config.apply(&parse_pairs(text, "run.conf").unwrap()).unwrap();
        config.apply(&[("cycles".into(), "5".into()), ("selection".into(), "top-k".into())]).unwrap();
        assert_eq!(config.cycle.mode, Mode::Long1Iter);
        assert_eq!(config.cycle.cycles, 5);
        assert_eq!(config.cycle.k_per_cycle, 8);
        assert_eq!(config.cycle.selection, Some(Selection::TopK));
        assert_eq!(config.trainer_spec().unwrap(), BackendSpec::StubLong1);
    }

    #[test]
    fn syntax_and_key_errors() {
        assert_eq!(
            parse_pairs("mode = vanilla\nnonsense\n", "x").unwrap_err(),
            ConfigError::Syntax { source_name: "x".into(), line: 2 }
        );
        let mut config = RunConfig::default();
        assert!(matches!(config.set("colour", "red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(config.set("api_key", "sk-1"), Err(ConfigError::SecretInConfig(_))));
        assert!(matches!(config.set("cycles", "ten"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(config.set("mode", "lead3-iter"), Err(ConfigError::InvalidValue { .. })));
    }

    #[test]
    fn llm_mode_requires_labeler() {
        let mut config = RunConfig::default();
        config
            .apply(&[("trainer_url".into(), "stub:long1".into()), ("embedder_url".into(), "stub:tfidf".into())])
            .unwrap();
        let err = config.validate().unwrap_err();
        assert!(err.contains("labeler_url"), "{err}");
        config.set("mode", "vanilla").unwrap();
        config.validate().unwrap();
    }

    #[test]
    fn backend_specs() {
        assert_eq!(BackendSpec::parse("stub:oracle").unwrap(), BackendSpec::StubOracle);
        assert_eq!(
            BackendSpec::parse("stub:noisy:0.25:out").unwrap(),
            BackendSpec::StubNoisy { rate: 0.25, mode: StubCorruption::OutOfRange }
        );
        assert_eq!(BackendSpec::parse("https://h.example/").unwrap(), BackendSpec::Http("https://h.example".into()));
        assert!(BackendSpec::parse("stub:noisy:2").is_err());
        assert!(BackendSpec::parse("ftp://x").is_err());
    }
}
