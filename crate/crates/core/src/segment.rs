//! Rule-based sentence segmentation, numbered rendering, and summary alignment.
//!
//! A boundary is placed after a run of terminal punctuation (`.`, `?`, `!`,
//! optionally followed by closing quotes or brackets) when the run is followed
//! by whitespace and then an uppercase letter, an emoji, or the end of the
//! line. Line breaks are hard boundaries. A `.` run is not a boundary when
//! the token it ends is a known abbreviation, and punctuation inside a URL
//! token never splits. Dots inside decimals and URLs are never followed by
//! whitespace, so the whitespace requirement protects them as well.
//!
//! Numbering is global across the dialog and starts at 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dialog, Speaker, Utterance};

const ABBREVIATIONS: &[&str] =
    &["mr.", "mrs.", "ms.", "dr.", "st.", "vs.", "e.g.", "i.e.", "etc.", "jr.", "sr.", "prof."];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SegmentError {
    #[error("dialog has no utterances")]
    EmptyDialog,
    #[error("summary text is empty")]
    EmptySummary,
    #[error("could not align {} summary sentence(s): {}", .unmatched.len(), .unmatched.join(" | "))]
    Alignment { unmatched: Vec<String> },
}

/// One numbered dialog sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    /// 1-based, global across the dialog.
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
    /// 0-based position of the source utterance.
    pub utterance: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceTable {
    pub entries: Vec<Sentence>,
}

impl SentenceTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up a sentence by its 1-based index.
    pub fn get(&self, index: usize) -> Option<&Sentence> {
        index.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sentence> {
        self.entries.iter()
    }
}

/// Byte range of one sentence inside a piece of text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!' | '…')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '”' | '’' | '»')
}

pub(crate) fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2B00..=0x2BFF | 0x2190..=0x21FF)
}

fn is_url_token(token: &str) -> bool {
    let lower = token.to_ascii_lowercase();
    lower.contains("://") || lower.starts_with("www.")
}

/// The whitespace-delimited token containing byte offset `at`.
fn token_around(line: &str, at: usize) -> (usize, usize) {
    let start =
        line[..at].char_indices().rev().find(|(_, c)| c.is_whitespace()).map(|(i, c)| i + c.len_utf8()).unwrap_or(0);
    let end = line[at..].char_indices().find(|(_, c)| c.is_whitespace()).map(|(i, _)| at + i).unwrap_or(line.len());
    (start, end)
}

fn split_line(line: &str, offset: usize, out: &mut Vec<Span>) {
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut sentence_start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if sentence_start.is_none() && !c.is_whitespace() {
            sentence_start = Some(pos);
        }
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let run_start = i;
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        while j < chars.len() && is_closing(chars[j].1) {
            j += 1;
        }
        let run_end = chars.get(j).map(|&(p, _)| p).unwrap_or(line.len());
        let followed_by_space = j == chars.len() || chars[j].1.is_whitespace();
        if !followed_by_space {
            i = j;
            continue;
        }
        let next = chars[j..].iter().find(|(_, c)| !c.is_whitespace());
        let opens_sentence = match next {
            None => true,
            Some(&(_, n)) => n.is_uppercase() || is_emoji(n),
        };
        let guarded = {
            let (tok_start, tok_end) = token_around(line, pos);
            let token = &line[tok_start..tok_end];
            let single_dot = c == '.' && j - run_start == 1;
            (single_dot && next.is_some() && ABBREVIATIONS.contains(&token.to_lowercase().as_str()))
                || (is_url_token(token) && run_end < tok_end)
        };
        if opens_sentence && !guarded {
            if let Some(start) = sentence_start.take() {
                out.push(Span { start: offset + start, end: offset + run_end });
            }
        }
        i = j;
    }
    if let Some(start) = sentence_start {
        let trimmed = line[start..].trim_end();
        if !trimmed.is_empty() {
            out.push(Span { start: offset + start, end: offset + start + trimmed.len() });
        }
    }
}

/// Splits free text into sentence spans. Deterministic; whitespace between
/// sentences belongs to no span.
pub fn split_text(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        split_line(body, offset, &mut spans);
        offset += line.len();
    }
    spans
}

/// Convenience wrapper returning sentence strings.
pub fn split_text_sentences(text: &str) -> Vec<&str> {
    split_text(text).into_iter().map(|s| &text[s.start..s.end]).collect()
}

pub(crate) fn segment_utterances(utterances: &[Utterance]) -> Result<SentenceTable, SegmentError> {
    if utterances.is_empty() {
        return Err(SegmentError::EmptyDialog);
    }
    let mut entries = Vec::new();
    for (u, utt) in utterances.iter().enumerate() {
        for span in split_text(&utt.text) {
            entries.push(Sentence {
                index: entries.len() + 1,
                speaker: utt.speaker,
                text: utt.text[span.start..span.end].to_string(),
                utterance: u,
            });
        }
    }
    Ok(SentenceTable { entries })
}

/// Segments every utterance of `dialog` and numbers sentences 1..N across the
/// whole dialog.
pub fn split_sentences(dialog: &Dialog) -> Result<SentenceTable, SegmentError> {
    segment_utterances(&dialog.utterances)
}

/// One line per sentence, `<n>) <text>`. The first sentence of each utterance
/// carries the speaker prefix in front of its number.
pub fn render_numbered(table: &SentenceTable) -> String {
    let mut lines = Vec::with_capacity(table.len());
    let mut prev_utterance = None;
    for s in table.iter() {
        let prefix =
            if prev_utterance != Some(s.utterance) { format!("{}: ", s.speaker.label()) } else { String::new() };
        prev_utterance = Some(s.utterance);
        lines.push(format!("{prefix}{}) {}", s.index, s.text));
    }
    lines.join("\n")
}

/// Lowercases, replaces punctuation with spaces, and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let replaced: String =
        text.chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect::<String>().to_lowercase();
    replaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Multiset token-overlap F1 between two normalized texts.
pub fn token_f1(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let mut counts = std::collections::HashMap::new();
    for t in &tb {
        *counts.entry(*t).or_insert(0usize) += 1;
    }
    let mut overlap = 0usize;
    for t in &ta {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / ta.len() as f64;
    let r = overlap as f64 / tb.len() as f64;
    2.0 * p * r / (p + r)
}

/// Tries to read `text` as dialog sentences joined by whitespace, verbatim.
/// Lower indices win when several decompositions exist.
pub fn decompose_verbatim(text: &str, table: &SentenceTable) -> Option<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let mut dead = std::collections::HashSet::new();
    let mut path = Vec::new();
    if decompose_from(text, 0, table, &mut dead, &mut path) {
        Some(path)
    } else {
        None
    }
}

fn decompose_from(
    text: &str,
    pos: usize,
    table: &SentenceTable,
    dead: &mut std::collections::HashSet<usize>,
    path: &mut Vec<usize>,
) -> bool {
    if pos == text.len() {
        return true;
    }
    if dead.contains(&pos) {
        return false;
    }
    let rest = &text[pos..];
    for s in table.iter() {
        if !rest.starts_with(s.text.as_str()) {
            continue;
        }
        let end = pos + s.text.len();
        let tail = &text[end..];
        let boundary_ok = tail.is_empty() || tail.starts_with(char::is_whitespace);
        if !boundary_ok {
            continue;
        }
        let next = end + (tail.len() - tail.trim_start().len());
        path.push(s.index);
        if decompose_from(text, next, table, dead, path) {
            return true;
        }
        path.pop();
    }
    dead.insert(pos);
    false
}

fn dedupe_keep_first(indices: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    indices.into_iter().filter(|i| seen.insert(*i)).collect()
}

/// Best F1 match for a normalized sentence; ties go to the lowest index.
pub(crate) fn best_overlap(normalized: &str, table: &SentenceTable) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for s in table.iter() {
        let f = token_f1(normalized, &normalize(&s.text));
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((s.index, f));
        }
    }
    best
}

/// Maps each sentence of a free-text summary onto a dialog sentence index.
///
/// Verbatim concatenations are recognised first. Otherwise each summary
/// sentence takes the dialog sentence with equal normalized text, or the one
/// with the highest token-overlap F1 if that F1 is at least 0.5.
pub fn align_summary_to_indices(summary_text: &str, table: &SentenceTable) -> Result<Vec<usize>, SegmentError> {
    if summary_text.trim().is_empty() {
        return Err(SegmentError::EmptySummary);
    }
    if let Some(indices) = decompose_verbatim(summary_text, table) {
        return Ok(dedupe_keep_first(indices));
    }
    let normalized_table: Vec<String> = table.iter().map(|s| normalize(&s.text)).collect();
    let mut indices = Vec::new();
    let mut unmatched = Vec::new();
    for sentence in split_text_sentences(summary_text) {
        if let Some(found) = decompose_verbatim(sentence, table) {
            indices.extend(found);
            continue;
        }
        let norm = normalize(sentence);
        if !norm.is_empty() {
            if let Some(pos) = normalized_table.iter().position(|t| *t == norm) {
                indices.push(pos + 1);
                continue;
            }
        }
        match best_overlap(&norm, table) {
            Some((idx, f)) if f >= 0.5 => indices.push(idx),
            _ => unmatched.push(sentence.to_string()),
        }
    }
    if !unmatched.is_empty() {
        return Err(SegmentError::Alignment { unmatched });
    }
    Ok(dedupe_keep_first(indices))
}
