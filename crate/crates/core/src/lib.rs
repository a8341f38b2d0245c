//! Semi-supervised extractive dialog summarization.
//!
//! The pipeline pseudo-labels unlabeled customer-support dialogs with a large
//! completion model framed as sentence-number question answering, ranks the
//! pseudo-labels by the log-probability of the emitted sentence numbers, and
//! grows the training set of a small summarizer over a fixed number of
//! cycles. Summaries produced by the trained model are forced back onto
//! dialog sentences by embedding similarity so every reported prediction is
//! strictly extractive. Evaluation uses a native ROUGE-1/-2/-L implementation.
//!
//! Model roles are reached through the traits in [`backends`]; deterministic
//! stub implementations make the whole loop runnable offline.

pub mod backends;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod heuristics;
pub mod matching;
pub mod metrics;
pub mod orchestrator;
pub mod prompting;
pub mod scoring;
pub mod segment;

pub use corpus::{DatasetSplit, Dialog, ExtractiveSummary, LabeledExample, Pools, Speaker, Utterance};
pub use metrics::{EvalReport, RougeScore};
pub use scoring::PseudoLabelCandidate;
pub use segment::{Sentence, SentenceTable};
