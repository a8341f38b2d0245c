//! Importer for the published TweetSumm export.
//!
//! Each line is one processed dialog as written by the TweetSumm processing
//! scripts:
//!
//! ```json
//! {"dialog": {"dialog_id": "...", "turns": [{"is_agent": false, "sentences": ["..."]}]},
//!  "summaries": {"extractive_summaries": [[{"is_agent": false, "sentences": ["..."]}]],
//!                "abstractive_summaries": [["..."]]}}
//! ```
//!
//! Turns are re-segmented with our own splitter, so every extractive summary
//! is aligned back onto the new sentence numbering. Records with no alignable
//! summary are dropped and counted.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{CorpusError, DatasetSplit, Dialog, LabeledExample, Speaker, Utterance};
use crate::segment;

#[derive(Debug, Deserialize)]
struct Record {
    dialog: RecordDialog,
    #[serde(default)]
    summaries: Option<RecordSummaries>,
}

#[derive(Debug, Deserialize)]
struct RecordDialog {
    #[serde(alias = "conversation_id")]
    dialog_id: String,
    turns: Vec<RecordTurn>,
}

#[derive(Debug, Deserialize)]
struct RecordTurn {
    is_agent: bool,
    #[serde(default)]
    sentences: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
struct RecordSummaries {
    #[serde(default)]
    extractive_summaries: Vec<Option<Vec<RecordTurn>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportStats {
    pub records: usize,
    /// Dialogs dropped, with the reason.
    pub dropped: Vec<(String, String)>,
}

impl ImportStats {
    pub fn alignment_failures(&self) -> usize {
        self.dropped.len()
    }
}

fn split_files(dir: &Path) -> Result<[Option<PathBuf>; 3], CorpusError> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io { path: dir.display().to_string(), source })?;
    let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
    files.sort();
    let find = |keys: &[&str]| {
        files
            .iter()
            .find(|p| {
                let name = p.file_name().unwrap_or_default().to_string_lossy().to_lowercase();
                keys.iter().any(|k| name.contains(k))
            })
            .cloned()
    };
    Ok([find(&["train"]), find(&["valid", "dev"]), find(&["test"])])
}

/// Imports a directory of TweetSumm files (`*train*`, `*valid*`, `*test*`),
/// or a single file which is then treated as the test split.
pub fn import_tweetsumm(path: &Path) -> Result<(DatasetSplit, ImportStats), CorpusError> {
    let mut stats = ImportStats::default();
    let mut split = DatasetSplit::default();
    if path.is_file() {
        split.test = import_file(path, &mut stats)?;
        return Ok((split, stats));
    }
    let [train, valid, test] = split_files(path)?;
    if let Some(p) = train {
        split.train = import_file(&p, &mut stats)?;
    }
    if let Some(p) = valid {
        split.validation = import_file(&p, &mut stats)?;
    }
    if let Some(p) = test {
        split.test = import_file(&p, &mut stats)?;
    }
    Ok((split, stats))
}

fn import_file(path: &Path, stats: &mut ImportStats) -> Result<Vec<LabeledExample>, CorpusError> {
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            path: display.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        stats.records += 1;
        let id = record.dialog.dialog_id.clone();
        match convert(record) {
            Ok(example) => out.push(example),
            Err(reason) => {
                log::warn!("dropping TweetSumm dialog {id}: {reason}");
                stats.dropped.push((id, reason));
            }
        }
    }
    Ok(out)
}

fn turn_text(turn: &RecordTurn) -> String {
    turn.sentences.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

fn convert(record: Record) -> Result<LabeledExample, String> {
    let utterances: Vec<Utterance> = record
        .dialog
        .turns
        .iter()
        .map(|t| Utterance { speaker: if t.is_agent { Speaker::Agent } else { Speaker::Customer }, text: turn_text(t) })
        .filter(|u| !u.text.is_empty())
        .collect();
    let dialog = Dialog::new(record.dialog.dialog_id, utterances).map_err(|e| e.to_string())?;
    let mut references = Vec::new();
    let mut last_error = None;
    for summary in record.summaries.unwrap_or_default().extractive_summaries.into_iter().flatten() {
        let mut indices = Vec::new();
        let mut failed = false;
        for turn in &summary {
            for sentence in turn.sentences.iter().filter(|s| !s.trim().is_empty()) {
                match segment::align_summary_to_indices(sentence, &dialog.sentences) {
                    Ok(found) => indices.extend(found),
                    Err(e) => {
                        last_error = Some(e.to_string());
                        failed = true;
                    }
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        indices.retain(|i| seen.insert(*i));
        if !failed && !indices.is_empty() {
            references.push(indices);
        }
    }
    if references.is_empty() {
        return Err(last_error.unwrap_or_else(|| "no extractive summaries".into()));
    }
    LabeledExample::new(dialog, references).map_err(|e| e.to_string())
}
