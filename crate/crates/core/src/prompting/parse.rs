use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::backends::CompletionResult;
use crate::corpus::Speaker;

/// Position of the token that starts one emitted sentence number, with its
/// log-probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumberSpan {
    pub token_position: usize,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub customer_indices: Vec<usize>,
    pub agent_indices: Vec<usize>,
    /// One entry per emitted number, customer numbers first.
    pub number_token_spans: Vec<NumberSpan>,
}

impl ParsedAnswer {
    /// An answer whose every number carries the same log-probability. Used
    /// for heuristic and self-labelled candidates, which have no labeller.
    pub fn from_indices(customer: Vec<usize>, agent: Vec<usize>, logprob: f64) -> Self {
        let count = customer.len() + agent.len();
        ParsedAnswer {
            customer_indices: customer,
            agent_indices: agent,
            number_token_spans: (0..count).map(|i| NumberSpan { token_position: i, logprob }).collect(),
        }
    }

    pub fn index_count(&self) -> usize {
        self.customer_indices.len() + self.agent_indices.len()
    }
}

struct Label {
    at: usize,
    end: usize,
    speaker: Speaker,
}

fn find_labels(lower: &str) -> Vec<Label> {
    let bytes = lower.as_bytes();
    let mut labels = Vec::new();
    for (word, speaker) in [("customer", Speaker::Customer), ("agent", Speaker::Agent)] {
        for (at, _) in lower.match_indices(word) {
            let end = at + word.len();
            let before_ok = at == 0 || !bytes[at - 1].is_ascii_alphanumeric();
            let after_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
            if before_ok && after_ok {
                labels.push(Label { at, end, speaker });
            }
        }
    }
    labels.sort_by_key(|l| l.at);
    labels
}

/// Digit runs not glued to a preceding letter, as (byte offset, value).
/// Values that overflow saturate so they surface as out of range.
fn numbers_in(text: &str, base: usize) -> Vec<(usize, u64)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if start > 0 && bytes[start - 1].is_ascii_alphabetic() {
            continue;
        }
        let value = text[start..i].parse::<u64>().unwrap_or(u64::MAX);
        out.push((base + start, value));
    }
    out
}

/// Extracts customer and agent sentence numbers from a QA completion.
///
/// Accepts `Customer`/`Agent` labels in any order and case, followed by `:`,
/// `-` or nothing, with numbers separated by commas, spaces or `and`. Text
/// before the first label belongs to the customer, since the prompt ends with
/// the `Customer:` cue. Parsing stops at the first blank line. Each number is
/// paired with the log-probability of the token it starts in.
pub fn parse_qa_answer(completion: &CompletionResult, n_sentences: usize) -> Result<ParsedAnswer, PromptError> {
    let text = completion.text.as_str();
    if completion.tokens.is_empty() && !text.is_empty() {
        return Err(PromptError::MissingLogprobs);
    }
    let joined_len: usize = completion.tokens.iter().map(|t| t.text.len()).sum();
    if joined_len != text.len() || completion.tokens.iter().map(|t| t.text.as_str()).collect::<String>() != text {
        return Err(PromptError::TokenMismatch);
    }

    let mut scope = text;
    if let Some(cut) = text.find("\n\n") {
        if !numbers_in(&text[..cut], 0).is_empty() {
            scope = &text[..cut];
        }
    }
    let lower = scope.to_ascii_lowercase();
    let labels = find_labels(&lower);

    let mut segments: Vec<(Speaker, usize, usize)> = Vec::new();
    let first_label = labels.first().map_or(scope.len(), |l| l.at);
    segments.push((Speaker::Customer, 0, first_label));
    for (k, label) in labels.iter().enumerate() {
        let end = labels.get(k + 1).map_or(scope.len(), |l| l.at);
        segments.push((label.speaker, label.end, end));
    }

    let mut customer = Vec::new();
    let mut agent = Vec::new();
    let mut bad = Vec::new();
    for (speaker, start, end) in segments {
        for (offset, value) in numbers_in(&scope[start..end], start) {
            if value == 0 || value > n_sentences as u64 {
                bad.push(value);
                continue;
            }
            match speaker {
                Speaker::Customer => customer.push((offset, value as usize)),
                Speaker::Agent => agent.push((offset, value as usize)),
            }
        }
    }
    if customer.is_empty() && agent.is_empty() && bad.is_empty() {
        return Err(PromptError::Unparseable);
    }
    if !bad.is_empty() {
        return Err(PromptError::OutOfRange { bad, n: n_sentences });
    }

    let mut starts = Vec::with_capacity(completion.tokens.len());
    let mut pos = 0;
    for t in &completion.tokens {
        starts.push(pos);
        pos += t.text.len();
    }
    let token_at = |offset: usize| starts.partition_point(|&s| s <= offset) - 1;
    let span = |offset: usize| {
        let t = token_at(offset);
        NumberSpan { token_position: t, logprob: completion.tokens[t].logprob }
    };
    let number_token_spans = customer.iter().chain(&agent).map(|&(offset, _)| span(offset)).collect();
    Ok(ParsedAnswer {
        customer_indices: customer.into_iter().map(|(_, v)| v).collect(),
        agent_indices: agent.into_iter().map(|(_, v)| v).collect(),
        number_token_spans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::TokenLogprob;

    fn completion(pieces: &[(&str, f64)]) -> CompletionResult {
        CompletionResult {
            text: pieces.iter().map(|p| p.0).collect(),
            tokens: pieces.iter().map(|&(t, l)| TokenLogprob { text: t.into(), logprob: l }).collect(),
        }
    }

    fn whole(text: &str) -> CompletionResult {
        completion(&[(text, -0.1)])
    }

    #[test]
    fn well_formed_answer() {
        let c = completion(&[
            ("Customer", -0.01),
            (":", -0.01),
            (" 1", -0.2),
            (",", -0.01),
            (" 2", -0.3),
            (".", -0.01),
            (" Agent", -0.01),
            (":", -0.01),
            (" 4", -0.4),
            (".", -0.01),
        ]);
        let a = parse_qa_answer(&c, 4).unwrap();
        assert_eq!(a.customer_indices, [1, 2]);
        assert_eq!(a.agent_indices, [4]);
        assert_eq!(a.number_token_spans.len(), 3);
        assert_eq!(
            a.number_token_spans,
            [
                NumberSpan { token_position: 2, logprob: -0.2 },
                NumberSpan { token_position: 4, logprob: -0.3 },
                NumberSpan { token_position: 8, logprob: -0.4 },
            ]
        );
    }

    #[test]
    fn multi_digit_number_uses_first_token() {
        let c = completion(&[("Customer: ", -0.1), ("1", -0.5), ("2", -0.9), (". Agent: 3.", -0.1)]);
        let a = parse_qa_answer(&c, 20).unwrap();
        assert_eq!(a.customer_indices, [12]);
        assert_eq!(a.number_token_spans[0], NumberSpan { token_position: 1, logprob: -0.5 });
    }

    #[test]
    fn out_of_range_cites_index() {
        assert_eq!(
            parse_qa_answer(&whole("Customer: 9"), 4).unwrap_err(),
            PromptError::OutOfRange { bad: vec![9], n: 4 }
        );
        assert!(matches!(parse_qa_answer(&whole("Customer: 0. Agent: 1."), 4), Err(PromptError::OutOfRange { .. })));
    }

    #[test]
    fn garbage_is_unparseable() {
        assert_eq!(parse_qa_answer(&whole("I cannot summarize this."), 4).unwrap_err(), PromptError::Unparseable);
        assert_eq!(parse_qa_answer(&whole("Customer: none. Agent: none."), 4).unwrap_err(), PromptError::Unparseable);
    }

    #[test]
    fn tolerant_forms() {
        let a = parse_qa_answer(&whole(" 1 and 2. Agent - 3"), 4).unwrap();
        assert_eq!((a.customer_indices, a.agent_indices), (vec![1, 2], vec![3]));
        let a = parse_qa_answer(&whole("agent: 4. customer: 2"), 4).unwrap();
        assert_eq!((a.customer_indices, a.agent_indices), (vec![2], vec![4]));
        let a = parse_qa_answer(&whole("Customer: 1.\n\n5) Extra numbered text 9"), 4).unwrap();
        assert_eq!(a.customer_indices, [1]);
    }

    #[test]
    fn token_text_must_match() {
        let c = CompletionResult {
            text: "Customer: 1".into(),
            tokens: vec![TokenLogprob { text: "x".into(), logprob: 0.0 }],
        };
        assert_eq!(parse_qa_answer(&c, 4).unwrap_err(), PromptError::TokenMismatch);
        let c = CompletionResult { text: "Customer: 1".into(), tokens: vec![] };
        assert_eq!(parse_qa_answer(&c, 4).unwrap_err(), PromptError::MissingLogprobs);
    }
}
