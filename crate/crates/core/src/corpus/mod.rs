//! Dialogs, extractive summaries, dataset splits and the labeled /
//! unlabeled / selected example pools.

mod io;
mod pools;
pub mod synthetic;
mod tweetsumm;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segment::{self, SegmentError, SentenceTable};

pub use io::{load_dataset, parse_canonical_line, write_canonical, DatasetFormat};
pub use pools::{merge_pools, subsample_labeled, Pools};
pub use tweetsumm::{import_tweetsumm, ImportStats};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid dialog {id}: {message}")]
    Validation { id: String, message: String },
    #[error("unknown dataset format {0:?} (expected canonical-jsonl or tweetsumm-import)")]
    UnknownFormat(String),
    #[error("duplicate dialog id {0}")]
    DuplicateId(String),
    #[error("dataset at {0} contains no records")]
    Empty(String),
    #[error("fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),
    #[error("dialog {0} is not in the unlabeled pool")]
    NotUnlabeled(String),
    #[error("dialog {0} was already selected")]
    DuplicateSelection(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Customer,
    Agent,
}

impl Speaker {
    pub fn label(self) -> &'static str {
        match self {
            Speaker::Customer => "Customer",
            Speaker::Agent => "Agent",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Serialize, Deserialize)]
struct RawDialog {
    id: String,
    turns: Vec<Utterance>,
}

/// A segmented customer-agent dialog. Serializes as `{"id", "turns"}`; the
/// sentence table is rebuilt on deserialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDialog", into = "RawDialog")]
pub struct Dialog {
    pub id: String,
    pub utterances: Vec<Utterance>,
    pub sentences: SentenceTable,
}

impl TryFrom<RawDialog> for Dialog {
    type Error = CorpusError;

    fn try_from(raw: RawDialog) -> Result<Self, Self::Error> {
        Dialog::new(raw.id, raw.turns)
    }
}

impl From<Dialog> for RawDialog {
    fn from(d: Dialog) -> Self {
        RawDialog { id: d.id, turns: d.utterances }
    }
}

impl Dialog {
    pub fn new(id: impl Into<String>, utterances: Vec<Utterance>) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.is_empty() {
            return Err(CorpusError::Validation { id, message: "empty id".into() });
        }
        if let Some(pos) = utterances.iter().position(|u| u.text.trim().is_empty()) {
            return Err(CorpusError::Validation { id, message: format!("utterance {} is empty", pos + 1) });
        }
        let sentences = segment::segment_utterances(&utterances)
            .map_err(|e| CorpusError::Validation { id: id.clone(), message: e.to_string() })?;
        Ok(Dialog { id, utterances, sentences })
    }

    pub fn from_turns<S: AsRef<str>>(id: impl Into<String>, turns: Vec<(Speaker, S)>) -> Result<Self, CorpusError> {
        let utterances =
            turns.into_iter().map(|(speaker, text)| Utterance { speaker, text: text.as_ref().to_string() }).collect();
        Dialog::new(id, utterances)
    }

    pub fn n_sentences(&self) -> usize {
        self.sentences.len()
    }

    /// Plain transcript handed to summarizer backends: one `Speaker: text`
    /// line per utterance.
    pub fn source_text(&self) -> String {
        self.utterances
            .iter()
            .map(|u| format!("{}: {}", u.speaker.label(), u.text.replace('\n', " ")))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Inverse of [`Dialog::source_text`]. Lines without a speaker prefix
    /// continue the previous utterance (or open a customer turn).
    pub fn from_source_text(id: impl Into<String>, text: &str) -> Result<Self, CorpusError> {
        let mut utterances: Vec<Utterance> = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let parsed = [Speaker::Customer, Speaker::Agent]
                .into_iter()
                .find_map(|sp| line.strip_prefix(sp.label()).and_then(|r| r.strip_prefix(':')).map(|r| (sp, r.trim())));
            match (parsed, utterances.last_mut()) {
                (Some((speaker, body)), _) if !body.is_empty() => {
                    utterances.push(Utterance { speaker, text: body.to_string() })
                }
                (Some(_), _) => {}
                (None, Some(last)) => {
                    last.text.push(' ');
                    last.text.push_str(line);
                }
                (None, None) => utterances.push(Utterance { speaker: Speaker::Customer, text: line.to_string() }),
            }
        }
        Dialog::new(id, utterances)
    }
}

/// Ordered sentence indices of one dialog plus their rendered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractiveSummary {
    pub indices: Vec<usize>,
    pub text: String,
}

impl ExtractiveSummary {
    /// Validates indices against `dialog` (range, no duplicates) and renders
    /// the referenced sentences joined by single spaces.
    pub fn from_indices(dialog: &Dialog, indices: Vec<usize>) -> Result<Self, CorpusError> {
        let mut seen = std::collections::HashSet::new();
        let mut parts = Vec::with_capacity(indices.len());
        for &i in &indices {
            let sentence = dialog.sentences.get(i).ok_or_else(|| CorpusError::Validation {
                id: dialog.id.clone(),
                message: format!("summary index {i} outside 1..={}", dialog.n_sentences()),
            })?;
            if !seen.insert(i) {
                return Err(CorpusError::Validation {
                    id: dialog.id.clone(),
                    message: format!("duplicate summary index {i}"),
                });
            }
            parts.push(sentence.text.as_str());
        }
        Ok(ExtractiveSummary { text: parts.join(" "), indices })
    }

    pub fn validate(&self, dialog: &Dialog) -> Result<(), CorpusError> {
        let rebuilt = ExtractiveSummary::from_indices(dialog, self.indices.clone())?;
        if rebuilt.text != self.text {
            return Err(CorpusError::Validation {
                id: dialog.id.clone(),
                message: "summary text does not match its indices".into(),
            });
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct RawLabeled {
    dialog: Dialog,
    references: Vec<Vec<usize>>,
}

/// A dialog with one or more human reference summaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabeled", into = "RawLabeled")]
pub struct LabeledExample {
    pub dialog: Dialog,
    pub references: Vec<ExtractiveSummary>,
}

impl TryFrom<RawLabeled> for LabeledExample {
    type Error = CorpusError;

    fn try_from(raw: RawLabeled) -> Result<Self, Self::Error> {
        LabeledExample::new(raw.dialog, raw.references)
    }
}

impl From<LabeledExample> for RawLabeled {
    fn from(e: LabeledExample) -> Self {
        RawLabeled { references: e.references.into_iter().map(|r| r.indices).collect(), dialog: e.dialog }
    }
}

impl LabeledExample {
    pub fn new(dialog: Dialog, references: Vec<Vec<usize>>) -> Result<Self, CorpusError> {
        if references.is_empty() {
            return Err(CorpusError::Validation { id: dialog.id.clone(), message: "no reference summaries".into() });
        }
        let references = references
            .into_iter()
            .map(|idx| {
                if idx.is_empty() {
                    return Err(CorpusError::Validation {
                        id: dialog.id.clone(),
                        message: "empty reference summary".into(),
                    });
                }
                ExtractiveSummary::from_indices(&dialog, idx)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LabeledExample { dialog, references })
    }

    pub fn id(&self) -> &str {
        &self.dialog.id
    }

    /// Target used when this example trains the summarizer.
    pub fn primary_reference(&self) -> &ExtractiveSummary {
        &self.references[0]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

impl DatasetSplit {
    /// Checks id uniqueness across all three splits.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = std::collections::HashSet::new();
        for ex in self.train.iter().chain(&self.validation).chain(&self.test) {
            if !seen.insert(ex.id()) {
                return Err(CorpusError::DuplicateId(ex.id().to_string()));
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }

    pub fn all(&self) -> impl Iterator<Item = &LabeledExample> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }
}

impl From<SegmentError> for CorpusError {
    fn from(e: SegmentError) -> Self {
        CorpusError::Validation { id: String::new(), message: e.to_string() }
    }
}
