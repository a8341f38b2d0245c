//! Few-shot prompt construction for the sentence-number QA framing and the
//! direct-completion framing, plus parsing of QA answers back into sentence
//! indices.
//!
//! QA prompt layout:
//!
//! ```text
//! <instruction>
//!
//! <numbered shot dialog>
//! Customer: 1, 2. Agent: 4.
//!
//! <numbered target dialog>
//! Customer:
//! ```

mod parse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dialog, ExtractiveSummary, LabeledExample, Speaker};
use crate::segment::render_numbered;

pub use parse::{parse_qa_answer, NumberSpan, ParsedAnswer};

pub const ALLOWED_SHOTS: [usize; 5] = [0, 1, 2, 4, 8];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("prompt needs {needed} tokens but only {available} fit the budget")]
    BudgetUnsatisfiable { needed: usize, available: usize },
    #[error("{given} shots supplied but the budget asks for {expected}")]
    ShotCountMismatch { given: usize, expected: usize },
    #[error("invalid prompt budget: {0}")]
    InvalidBudget(String),
    #[error("invalid few-shot example {id}: {message}")]
    InvalidShot { id: String, message: String },
    #[error("completion contains no sentence numbers")]
    Unparseable,
    #[error("sentence numbers out of range 1..={n}: {bad:?}")]
    OutOfRange { bad: Vec<u64>, n: usize },
    #[error("completion has no per-token log-probabilities")]
    MissingLogprobs,
    #[error("completion tokens do not concatenate to its text")]
    TokenMismatch,
}

/// Counts prompt tokens for budget checks.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Whitespace token count times a 1.3 safety factor, rounded up. Used when
/// the backend exposes no tokenizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceEstimate;

impl TokenCounter for WhitespaceEstimate {
    fn count(&self, text: &str) -> usize {
        let words = text.split_whitespace().count();
        (words * 13).div_ceil(10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBudget {
    pub max_total_tokens: usize,
    pub max_answer_tokens: usize,
    pub shots: usize,
}

impl PromptBudget {
    pub fn new(max_total_tokens: usize, max_answer_tokens: usize, shots: usize) -> Result<Self, PromptError> {
        if !ALLOWED_SHOTS.contains(&shots) {
            return Err(PromptError::InvalidBudget(format!("shots must be one of {ALLOWED_SHOTS:?}, got {shots}")));
        }
        if max_answer_tokens >= max_total_tokens {
            return Err(PromptError::InvalidBudget(format!(
                "answer budget {max_answer_tokens} leaves no room in {max_total_tokens} tokens"
            )));
        }
        Ok(PromptBudget { max_total_tokens, max_answer_tokens, shots })
    }

    /// Tokens available to the prompt itself.
    pub fn prompt_allowance(&self) -> usize {
        self.max_total_tokens.saturating_sub(self.max_answer_tokens)
    }
}

impl Default for PromptBudget {
    fn default() -> Self {
        PromptBudget { max_total_tokens: 4096, max_answer_tokens: 64, shots: 2 }
    }
}

/// Largest allowed shot count not exceeding `available`.
pub fn allowed_shots_at_most(available: usize) -> usize {
    ALLOWED_SHOTS.iter().copied().filter(|&s| s <= available).max().unwrap_or(0)
}

/// Instruction texts. Overridable from run configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub qa_instruction: String,
    pub completion_instruction: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            qa_instruction: "Below is a conversation between a customer and a support agent, split into \
                numbered sentences. Answer with the sentence numbers that describe the customer's issue \
                and the sentence numbers that describe the agent's answer, written as \
                \"Customer: <numbers>. Agent: <numbers>.\""
                .into(),
            completion_instruction: "Summarize the conversation between a customer and a support agent. \
                Use sentences that are part of the dialog, copied exactly, covering the customer's issue \
                and the agent's answer."
                .into(),
        }
    }
}

/// A labeled dialog rendered as an in-context QA example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub dialog: Dialog,
    pub customer: Vec<usize>,
    pub agent: Vec<usize>,
}

impl FewShotExample {
    pub fn new(dialog: Dialog, customer: Vec<usize>, agent: Vec<usize>) -> Result<Self, PromptError> {
        for (role, list) in [(Speaker::Customer, &customer), (Speaker::Agent, &agent)] {
            for &i in list {
                match dialog.sentences.get(i) {
                    Some(s) if s.speaker == role => {}
                    Some(_) => {
                        return Err(PromptError::InvalidShot {
                            id: dialog.id.clone(),
                            message: format!("sentence {i} is not spoken by the {}", role.label().to_lowercase()),
                        })
                    }
                    None => {
                        return Err(PromptError::InvalidShot {
                            id: dialog.id.clone(),
                            message: format!("sentence {i} out of range"),
                        })
                    }
                }
            }
        }
        Ok(FewShotExample { dialog, customer, agent })
    }

    /// Splits the example's first reference by speaker.
    pub fn from_labeled(example: &LabeledExample) -> Self {
        let (customer, agent) = split_by_role(&example.dialog, &example.primary_reference().indices);
        FewShotExample { dialog: example.dialog.clone(), customer, agent }
    }

    pub fn answer_line(&self) -> String {
        render_answer_line(&self.customer, &self.agent)
    }
}

pub fn split_by_role(dialog: &Dialog, indices: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut customer = Vec::new();
    let mut agent = Vec::new();
    for s in indices.iter().filter_map(|&i| dialog.sentences.get(i)) {
        match s.speaker {
            Speaker::Customer => customer.push(s.index),
            Speaker::Agent => agent.push(s.index),
        }
    }
    (customer, agent)
}

fn render_list(list: &[usize]) -> String {
    if list.is_empty() {
        "none".into()
    } else {
        list.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
    }
}

/// `Customer: 1, 2. Agent: 4.`; an empty role renders as `none`.
pub fn render_answer_line(customer: &[usize], agent: &[usize]) -> String {
    format!("Customer: {}. Agent: {}.", render_list(customer), render_list(agent))
}

/// A rendered prompt and what had to be dropped to fit it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltPrompt {
    pub text: String,
    pub shots_requested: usize,
    pub shots_used: usize,
    pub token_count: usize,
}

impl BuiltPrompt {
    pub fn shots_dropped(&self) -> usize {
        self.shots_requested - self.shots_used
    }
}

fn fit_shots<F>(
    requested: usize,
    budget: &PromptBudget,
    counter: &dyn TokenCounter,
    render: F,
) -> Result<BuiltPrompt, PromptError>
where
    F: Fn(usize) -> String,
{
    let allowance = budget.prompt_allowance();
    for used in (0..=requested).rev() {
        let text = render(used);
        let tokens = counter.count(&text);
        if tokens <= allowance {
            if used < requested {
                log::debug!("dropped {} shot(s) to fit the prompt budget", requested - used);
            }
            return Ok(BuiltPrompt { text, shots_requested: requested, shots_used: used, token_count: tokens });
        }
        if used == 0 {
            return Err(PromptError::BudgetUnsatisfiable { needed: tokens, available: allowance });
        }
    }
    unreachable!("loop returns at used == 0")
}

fn check_shot_count(given: usize, budget: &PromptBudget) -> Result<(), PromptError> {
    if given != budget.shots {
        return Err(PromptError::ShotCountMismatch { given, expected: budget.shots });
    }
    Ok(())
}

/// Builds the sentence-number QA prompt. Shots are dropped from the end until
/// the prompt fits `budget`.
pub fn build_qa_prompt(
    target: &Dialog,
    shots: &[FewShotExample],
    budget: &PromptBudget,
    templates: &PromptTemplates,
    counter: &dyn TokenCounter,
) -> Result<BuiltPrompt, PromptError> {
    check_shot_count(shots.len(), budget)?;
    let rendered_shots: Vec<String> =
        shots.iter().map(|s| format!("{}\n{}", render_numbered(&s.dialog.sentences), s.answer_line())).collect();
    let target_block = format!("{}\nCustomer:", render_numbered(&target.sentences));
    fit_shots(shots.len(), budget, counter, |used| {
        let mut blocks = vec![templates.qa_instruction.clone()];
        blocks.extend(rendered_shots[..used].iter().cloned());
        blocks.push(target_block.clone());
        blocks.join("\n\n")
    })
}

/// Builds the direct-completion prompt from `(dialog, summary)` shots.
pub fn build_completion_prompt(
    target: &Dialog,
    shots: &[(Dialog, String)],
    budget: &PromptBudget,
    templates: &PromptTemplates,
    counter: &dyn TokenCounter,
) -> Result<BuiltPrompt, PromptError> {
    check_shot_count(shots.len(), budget)?;
    let rendered_shots: Vec<String> =
        shots.iter().map(|(d, summary)| format!("Dialog:\n{}\nSummary: {}", d.source_text(), summary.trim())).collect();
    let target_block = format!("Dialog:\n{}\nSummary:", target.source_text());
    fit_shots(shots.len(), budget, counter, |used| {
        let mut blocks = vec![templates.completion_instruction.clone()];
        blocks.extend(rendered_shots[..used].iter().cloned());
        blocks.push(target_block.clone());
        blocks.join("\n\n")
    })
}

/// Customer indices then agent indices, duplicates dropped keeping the first,
/// rendered verbatim from the dialog.
pub fn reconstruct_summary(dialog: &Dialog, answer: &ParsedAnswer) -> ExtractiveSummary {
    let mut seen = std::collections::HashSet::new();
    let indices: Vec<usize> =
        answer.customer_indices.iter().chain(&answer.agent_indices).copied().filter(|i| seen.insert(*i)).collect();
    ExtractiveSummary::from_indices(dialog, indices).expect("parsed answers carry in-range indices")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{CompletionResult, TokenLogprob};

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

    fn shot(id: &str) -> FewShotExample {
        let d = Dialog::from_turns(
            id,
            vec![(Speaker::Customer, "My screen is cracked."), (Speaker::Agent, "We will replace it.")],
        )
        .unwrap();
        FewShotExample::new(d, vec![1], vec![2]).unwrap()
    }

    struct Words;
    impl TokenCounter for Words {
        fn count(&self, text: &str) -> usize {
            text.split_whitespace().count()
        }
    }

    #[test]
    fn zero_shot_qa_prompt_ends_with_cue() {
        let budget = PromptBudget::new(4096, 64, 0).unwrap();
        let p = build_qa_prompt(&toy(), &[], &budget, &PromptTemplates::default(), &WhitespaceEstimate).unwrap();
        assert!(p.text.ends_with("4) I have issued a refund.\nCustomer:"), "{}", p.text);
        assert!(p.text.starts_with(&PromptTemplates::default().qa_instruction));
        assert_eq!(p.shots_used, 0);
    }

    #[test]
    fn two_shots_precede_target() {
        let budget = PromptBudget::new(4096, 64, 2).unwrap();
        let p =
            build_qa_prompt(&toy(), &[shot("a"), shot("b")], &budget, &PromptTemplates::default(), &WhitespaceEstimate)
                .unwrap();
        assert_eq!(p.shots_used, 2);
        assert_eq!(p.text.matches("Customer: 1. Agent: 2.").count(), 2);
        let target_pos = p.text.find("Hi, my order").unwrap();
        assert!(p.text.rfind("Agent: 2.").unwrap() < target_pos);
    }

    #[test]
    fn shots_dropped_last_first() {
        let templates = PromptTemplates { qa_instruction: "Go.".into(), ..Default::default() };
        let zero = build_qa_prompt(&toy(), &[], &PromptBudget::new(4096, 64, 0).unwrap(), &templates, &Words).unwrap();
        let one_shot_cost = {
            let b = PromptBudget::new(4096, 64, 1).unwrap();
            build_qa_prompt(&toy(), &[shot("a")], &b, &templates, &Words).unwrap().token_count
        };
        let budget = PromptBudget { max_total_tokens: one_shot_cost + 1 + 10, max_answer_tokens: 10, shots: 2 };
        let first = shot("first");
        let mut second = shot("second");
        second.dialog = Dialog::from_turns(
            "second",
            vec![(Speaker::Customer, "Totally different wording here."), (Speaker::Agent, "Okay.")],
        )
        .unwrap();
        let p = build_qa_prompt(&toy(), &[first, second], &budget, &templates, &Words).unwrap();
        assert_eq!((p.shots_used, p.shots_dropped()), (1, 1));
        assert!(p.text.contains("My screen is cracked."));
        assert!(!p.text.contains("Totally different"));
        assert!(p.token_count > zero.token_count);
    }

    #[test]
    fn budget_unsatisfiable() {
        let long_turn = vec!["word"; 400].join(" ");
        let target = Dialog::from_turns("big", vec![(Speaker::Customer, long_turn)]).unwrap();
        let budget = PromptBudget { max_total_tokens: 50, max_answer_tokens: 10, shots: 0 };
        let err = build_completion_prompt(&target, &[], &budget, &PromptTemplates::default(), &WhitespaceEstimate)
            .unwrap_err();
        assert!(matches!(err, PromptError::BudgetUnsatisfiable { available: 40, .. }));
        let err = build_qa_prompt(&target, &[], &budget, &PromptTemplates::default(), &WhitespaceEstimate).unwrap_err();
        assert!(matches!(err, PromptError::BudgetUnsatisfiable { .. }));
    }

    #[test]
    fn completion_prompt_structure() {
        let budget = PromptBudget::new(4096, 64, 1).unwrap();
        let shot = (toy(), "Hi, my order 123 never arrived. I have issued a refund.".to_string());
        let p = build_completion_prompt(&toy(), &[shot], &budget, &PromptTemplates::default(), &WhitespaceEstimate)
            .unwrap();
        assert_eq!(p.text.matches("Dialog:\n").count(), 2);
        assert_eq!(p.text.matches("Summary:").count(), 2);
        assert!(p.text.ends_with("Summary:"));
        assert!(p.text.contains("part of the dialog"));

        let zero = PromptBudget::new(4096, 64, 0).unwrap();
        let p = build_completion_prompt(&toy(), &[], &zero, &PromptTemplates::default(), &WhitespaceEstimate).unwrap();
        assert_eq!(p.text.matches("Dialog:\n").count(), 1);
    }

    #[test]
    fn shot_count_must_match_budget() {
        let budget = PromptBudget::new(4096, 64, 2).unwrap();
        let err = build_qa_prompt(&toy(), &[shot("a")], &budget, &PromptTemplates::default(), &WhitespaceEstimate)
            .unwrap_err();
        assert_eq!(err, PromptError::ShotCountMismatch { given: 1, expected: 2 });
        assert!(PromptBudget::new(4096, 64, 3).is_err());
        assert_eq!(allowed_shots_at_most(3), 2);
        assert_eq!(allowed_shots_at_most(100), 8);
    }

    #[test]
    fn few_shot_roles_are_checked() {
        let err = FewShotExample::new(toy(), vec![3], vec![]).unwrap_err();
        assert!(matches!(err, PromptError::InvalidShot { .. }));
        let ex = LabeledExample::new(toy(), vec![vec![4, 1]]).unwrap();
        let shot = FewShotExample::from_labeled(&ex);
        assert_eq!((shot.customer.clone(), shot.agent.clone()), (vec![1], vec![4]));
        assert_eq!(shot.answer_line(), "Customer: 1. Agent: 4.");
        assert_eq!(render_answer_line(&[], &[3, 4]), "Customer: none. Agent: 3, 4.");
    }

    #[test]
    fn reconstruct_examples() {
        let d = toy();
        let a = ParsedAnswer::from_indices(vec![1], vec![4], -0.1);
        assert_eq!(reconstruct_summary(&d, &a).text, "Hi, my order 123 never arrived. I have issued a refund.");
        let a = ParsedAnswer::from_indices(vec![1, 1], vec![], -0.1);
        assert_eq!(reconstruct_summary(&d, &a).indices, [1]);
        let a = ParsedAnswer::from_indices(vec![1, 2], vec![3, 4], -0.1);
        let full: Vec<_> = d.sentences.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(reconstruct_summary(&d, &a).text, full.join(" "));
    }

    #[test]
    fn answer_line_parses_back() {
        let line = render_answer_line(&[2, 1], &[4]);
        let completion =
            CompletionResult { text: line.clone(), tokens: vec![TokenLogprob { text: line, logprob: -0.5 }] };
        let parsed = parse_qa_answer(&completion, 4).unwrap();
        assert_eq!(parsed.customer_indices, [2, 1]);
        assert_eq!(parsed.agent_indices, [4]);
    }
}
