use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::segment;

use super::{CorpusError, DatasetSplit, Dialog, LabeledExample, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    CanonicalJsonl,
    TweetsummImport,
}

impl FromStr for DatasetFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical-jsonl" | "canonical" | "jsonl" => Ok(DatasetFormat::CanonicalJsonl),
            "tweetsumm-import" | "tweetsumm" => Ok(DatasetFormat::TweetsummImport),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SplitName {
    Train,
    #[serde(alias = "valid", alias = "val", alias = "dev")]
    Validation,
    Test,
}

/// A stored summary: sentence indices, or raw sentence text that is aligned
/// to indices on load.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawSummary {
    Indices(Vec<usize>),
    Sentences(Vec<String>),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalRecord {
    id: String,
    turns: Vec<Utterance>,
    summaries: Vec<RawSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<SplitName>,
}

const SPLIT_FILES: [(SplitName, &[&str]); 3] = [
    (SplitName::Train, &["train.jsonl"]),
    (SplitName::Validation, &["validation.jsonl", "valid.jsonl", "val.jsonl", "dev.jsonl"]),
    (SplitName::Test, &["test.jsonl"]),
];

/// Loads a dataset.
///
/// `canonical-jsonl` accepts either a directory holding `train.jsonl`,
/// `validation.jsonl` and `test.jsonl`, or a single file whose records carry
/// a `"split"` field. `tweetsumm-import` reads the published TweetSumm export;
/// records that fail alignment are dropped (see [`super::import_tweetsumm`]).
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<DatasetSplit, CorpusError> {
    let split = match format {
        DatasetFormat::CanonicalJsonl => load_canonical(path)?,
        DatasetFormat::TweetsummImport => super::import_tweetsumm(path)?.0,
    };
    split.validate()?;
    if split.all().next().is_none() {
        return Err(CorpusError::Empty(path.display().to_string()));
    }
    Ok(split)
}

fn load_canonical(path: &Path) -> Result<DatasetSplit, CorpusError> {
    let mut split = DatasetSplit::default();
    if path.is_dir() {
        for (name, candidates) in SPLIT_FILES {
            let Some(file) = candidates.iter().map(|c| path.join(c)).find(|p| p.is_file()) else {
                continue;
            };
            let records = read_canonical(&file)?;
            if let Some(bad) = records.iter().find(|(s, _)| s.is_some_and(|s| s != name)) {
                return Err(CorpusError::Validation {
                    id: bad.1.id().to_string(),
                    message: format!("split field disagrees with file {}", file.display()),
                });
            }
            *slot(&mut split, name) = records.into_iter().map(|(_, e)| e).collect();
        }
        return Ok(split);
    }
    for (name, example) in read_canonical(path)? {
        let name = name.ok_or_else(|| CorpusError::Validation {
            id: example.id().to_string(),
            message: "record has no \"split\" field (required in single-file datasets)".into(),
        })?;
        slot(&mut split, name).push(example);
    }
    Ok(split)
}

fn slot(split: &mut DatasetSplit, name: SplitName) -> &mut Vec<LabeledExample> {
    match name {
        SplitName::Train => &mut split.train,
        SplitName::Validation => &mut split.validation,
        SplitName::Test => &mut split.test,
    }
}

/// Parses one canonical line. `line_no` is 1-based and only used in errors.
pub fn parse_canonical_line(line: &str, path: &str, line_no: usize) -> Result<LabeledExample, CorpusError> {
    parse_record(line, path, line_no).map(|(_, e)| e)
}

fn parse_record(line: &str, path: &str, line_no: usize) -> Result<(Option<SplitName>, LabeledExample), CorpusError> {
    let record: CanonicalRecord = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
        path: path.to_string(),
        line: line_no,
        message: e.to_string(),
    })?;
    let dialog = Dialog::new(record.id, record.turns)?;
    let references = record
        .summaries
        .into_iter()
        .map(|raw| match raw {
            RawSummary::Indices(idx) => Ok(idx),
            RawSummary::Sentences(parts) => align_text(&dialog, &parts.join(" ")),
            RawSummary::Text(text) => align_text(&dialog, &text),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((record.split, LabeledExample::new(dialog, references)?))
}

fn align_text(dialog: &Dialog, text: &str) -> Result<Vec<usize>, CorpusError> {
    segment::align_summary_to_indices(text, &dialog.sentences)
        .map_err(|e| CorpusError::Validation { id: dialog.id.clone(), message: e.to_string() })
}

fn read_canonical(path: &Path) -> Result<Vec<(Option<SplitName>, LabeledExample)>, CorpusError> {
    let display = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, &display, i + 1)?);
    }
    Ok(out)
}

fn to_record(example: &LabeledExample, split: Option<SplitName>) -> CanonicalRecord {
    CanonicalRecord {
        id: example.dialog.id.clone(),
        turns: example.dialog.utterances.clone(),
        summaries: example.references.iter().map(|r| RawSummary::Indices(r.indices.clone())).collect(),
        split,
    }
}

/// Writes `train.jsonl`, `validation.jsonl` and `test.jsonl` under `dir`.
pub fn write_canonical(split: &DatasetSplit, dir: &Path) -> Result<(), CorpusError> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source| CorpusError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, files) in SPLIT_FILES {
        let path = dir.join(files[0]);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        let examples = match name {
            SplitName::Train => &split.train,
            SplitName::Validation => &split.validation,
            SplitName::Test => &split.test,
        };
        for ex in examples {
            let line = serde_json::to_string(&to_record(ex, None)).expect("record serializes");
            writeln!(w, "{line}").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"id":"a","turns":[{"speaker":"customer","text":"Hi. Help me."},{"speaker":"agent","text":"Sure thing."}],"summaries":[[1,3]],"split":"train"}"#;

    #[test]
    fn parses_line() {
        let ex = parse_canonical_line(LINE, "mem", 1).unwrap();
        assert_eq!(ex.references[0].text, "Hi. Sure thing.");
    }

    #[test]
    fn parse_error_names_line() {
        let err = parse_canonical_line("{not json", "f.jsonl", 5).unwrap_err();
        assert!(err.to_string().starts_with("f.jsonl:5:"), "{err}");
    }

    #[test]
    fn out_of_range_summary_names_id() {
        let line = LINE.replace("[1,3]", "[9]");
        let err = parse_canonical_line(&line, "f", 1).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { ref id, .. } if id == "a"), "{err}");
    }

    #[test]
    fn raw_text_summary_is_aligned() {
        let line = LINE.replace("[[1,3]]", r#"[["Help me.", "Sure thing."], "Hi."]"#);
        let ex = parse_canonical_line(&line, "f", 1).unwrap();
        assert_eq!(ex.references[0].indices, [2, 3]);
        assert_eq!(ex.references[1].indices, [1]);
    }

    #[test]
    fn unalignable_text_summary_names_id() {
        let line = LINE.replace("[[1,3]]", r#"["zebra crossing mango"]"#);
        let err = parse_canonical_line(&line, "f", 1).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { ref id, .. } if id == "a"), "{err}");
    }

    #[test]
    fn unknown_format() {
        assert!(matches!("xml".parse::<DatasetFormat>(), Err(CorpusError::UnknownFormat(_))));
    }
}
