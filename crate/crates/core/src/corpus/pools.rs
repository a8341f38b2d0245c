use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Dialog, ExtractiveSummary, LabeledExample};
use crate::scoring::PseudoLabelCandidate;

/// Disjoint labeled, unlabeled and selected-pseudo-label pools.
///
/// Transitions return new values; a dialog id lives in at most one pool.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pools {
    pub labeled: Vec<LabeledExample>,
    pub unlabeled: Vec<Dialog>,
    pub selected: Vec<PseudoLabelCandidate>,
}

impl Pools {
    /// Size of the current training set, labeled plus selected.
    pub fn training_len(&self) -> usize {
        self.labeled.len() + self.selected.len()
    }

    pub fn total_len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len() + self.selected.len()
    }

    /// `(dialog, target)` pairs of the merged training set: labeled examples
    /// with their first reference, then selected pseudo-labels.
    pub fn training_pairs(&self) -> Vec<(&Dialog, &ExtractiveSummary)> {
        self.labeled
            .iter()
            .map(|e| (&e.dialog, e.primary_reference()))
            .chain(self.selected.iter().map(|c| (&c.dialog, &c.summary)))
            .collect()
    }

    pub fn selected_ids(&self) -> HashSet<String> {
        self.selected.iter().map(|c| c.dialog.id.clone()).collect()
    }
}

/// Picks `floor(fraction * |train|)` labeled examples by seeded uniform
/// sampling without replacement; the remaining dialogs lose their labels and
/// become the unlabeled pool. Both pools keep the input order.
pub fn subsample_labeled(train: &[LabeledExample], fraction: f64, seed: u64) -> Result<Pools, CorpusError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    // The epsilon absorbs products such as 0.29 * 100 = 28.999999999999996.
    let n_labeled = ((fraction * train.len() as f64) + 1e-9).floor() as usize;
    let n_labeled = n_labeled.min(train.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: HashSet<usize> = rand::seq::index::sample(&mut rng, train.len(), n_labeled).into_iter().collect();
    let mut pools = Pools::default();
    for (i, ex) in train.iter().enumerate() {
        if chosen.contains(&i) {
            pools.labeled.push(ex.clone());
        } else {
            pools.unlabeled.push(ex.dialog.clone());
        }
    }
    Ok(pools)
}

/// Moves `newly_selected` dialogs from the unlabeled pool into the selected
/// pool.
pub fn merge_pools(pools: &Pools, newly_selected: &[PseudoLabelCandidate]) -> Result<Pools, CorpusError> {
    let already = pools.selected_ids();
    let unlabeled: HashSet<&str> = pools.unlabeled.iter().map(|d| d.id.as_str()).collect();
    let mut incoming = HashSet::new();
    for c in newly_selected {
        let id = c.dialog.id.as_str();
        if already.contains(id) || !incoming.insert(id) {
            return Err(CorpusError::DuplicateSelection(id.to_string()));
        }
        if !unlabeled.contains(id) {
            return Err(CorpusError::NotUnlabeled(id.to_string()));
        }
    }
    let mut next = pools.clone();
    next.unlabeled.retain(|d| !incoming.contains(d.id.as_str()));
    next.selected.extend(newly_selected.iter().cloned());
    Ok(next)
}
