//! LEAD-k and LONG-1 baselines. Both pick per speaker role and return
//! indices in dialog order.

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialog, ExtractiveSummary, Speaker};
use crate::metrics::tokenize_for_rouge;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Lead1,
    Lead2,
    Long1,
}

impl Heuristic {
    pub fn apply(self, dialog: &Dialog) -> ExtractiveSummary {
        match self {
            Heuristic::Lead1 => lead_k(dialog, 1),
            Heuristic::Lead2 => lead_k(dialog, 2),
            Heuristic::Long1 => long_1(dialog),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Lead1 => "lead1",
            Heuristic::Lead2 => "lead2",
            Heuristic::Long1 => "long1",
        }
    }
}

impl std::str::FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lead1" => Ok(Heuristic::Lead1),
            "lead2" => Ok(Heuristic::Lead2),
            "long1" => Ok(Heuristic::Long1),
            other => Err(format!("unknown heuristic {other:?} (expected lead1, lead2 or long1)")),
        }
    }
}

fn render(dialog: &Dialog, mut indices: Vec<usize>) -> ExtractiveSummary {
    indices.sort_unstable();
    ExtractiveSummary::from_indices(dialog, indices).expect("heuristic indices come from the dialog")
}

/// First `k` customer sentences and first `k` agent sentences.
pub fn lead_k(dialog: &Dialog, k: usize) -> ExtractiveSummary {
    assert!(k >= 1, "lead_k requires k >= 1");
    let mut indices = Vec::new();
    for role in [Speaker::Customer, Speaker::Agent] {
        indices.extend(dialog.sentences.iter().filter(|s| s.speaker == role).take(k).map(|s| s.index));
    }
    render(dialog, indices)
}

/// Longest sentence per role in ROUGE tokens; ties go to the lower index.
pub fn long_1(dialog: &Dialog) -> ExtractiveSummary {
    let mut indices = Vec::new();
    for role in [Speaker::Customer, Speaker::Agent] {
        let longest = dialog
            .sentences
            .iter()
            .filter(|s| s.speaker == role)
            .map(|s| (tokenize_for_rouge(&s.text).len(), s.index))
            .fold(None, |best: Option<(usize, usize)>, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            });
        if let Some((_, idx)) = longest {
            indices.push(idx);
        }
    }
    render(dialog, indices)
}
