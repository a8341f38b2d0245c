//! Seeded synthetic customer-support dialogs for tests, demos and the
//! offline end-to-end loop. Each dialog's reference summary is its issue
//! sentence plus the agent's resolution sentence.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetSplit, Dialog, LabeledExample, Speaker};

const PRODUCTS: &[&str] = &[
    "headphones",
    "laptop charger",
    "coffee maker",
    "phone case",
    "router",
    "blender",
    "smart watch",
    "desk lamp",
    "keyboard",
    "backpack",
];
const GREETINGS: &[&str] = &["Hi there.", "Hello!", "Hey team.", "Good morning.", "Hi."];
const ISSUES: &[&str] = &[
    "My {p} from order {o} arrived broken.",
    "The {p} I bought {d} days ago stopped working.",
    "Order {o} with my {p} never showed up in {c}.",
    "I was charged twice for the {p} on order {o}.",
    "The {p} in order {o} is the wrong color.",
    "My {p} delivery to {c} is {d} days late.",
];
const DETAILS: &[&str] = &[
    "I really need it before the weekend.",
    "This is the second time this happened.",
    "I already tried restarting it.",
    "The tracking page shows no updates.",
    "Can you look into this?",
];
const APOLOGIES: &[&str] = &[
    "Sorry to hear about that.",
    "We apologize for the trouble.",
    "Thanks for reaching out to us.",
    "That is not the experience we want for you.",
];
const ASKS: &[&str] = &[
    "Could you confirm the email on the account?",
    "Please send us the order number via DM.",
    "Can you share a photo of the item?",
];
const CONFIRMS: &[&str] = &["Sure, it is in your DMs now.", "Done, just sent it.", "Yes, sent over."];
const RESOLUTIONS: &[&str] = &[
    "We have issued a full refund for order {o}.",
    "A replacement {p} will ship to {c} within {d} days.",
    "We reversed the duplicate charge on order {o}.",
    "Our courier will pick up the {p} and send a new one.",
    "We escalated order {o} and credited your account.",
];
const CLOSINGS: &[&str] = &["Anything else we can help with?", "Have a great day!", "Take care."];
const CITIES: &[&str] = &["Austin", "Leeds", "Toronto", "Dublin", "Denver", "Perth"];

fn fill(template: &str, rng: &mut ChaCha8Rng, product: &str, order: u32) -> String {
    template
        .replace("{p}", product)
        .replace("{o}", &order.to_string())
        .replace("{d}", &rng.random_range(2..15).to_string())
        .replace("{c}", CITIES.choose(rng).expect("non-empty"))
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty")
}

/// One dialog with id `id`. Sentence layout: the customer turn holds a
/// greeting, the issue and optionally a detail; the agent asks for info; the
/// customer confirms; the agent resolves and closes.
pub fn dialog(id: &str, rng: &mut ChaCha8Rng) -> LabeledExample {
    let product = pick(rng, PRODUCTS);
    let order: u32 = rng.random_range(10_000..99_999);
    let issue = fill(pick(rng, ISSUES), rng, product, order);
    let mut opening = vec![pick(rng, GREETINGS).to_string(), issue];
    if rng.random_bool(0.5) {
        opening.push(pick(rng, DETAILS).to_string());
    }
    let issue_index = 2;
    let ask = format!("{} {}", pick(rng, APOLOGIES), pick(rng, ASKS));
    let confirm = pick(rng, CONFIRMS).to_string();
    let resolution = fill(pick(rng, RESOLUTIONS), rng, product, order);
    let close = format!("{resolution} {}", pick(rng, CLOSINGS));
    let turns = vec![
        (Speaker::Customer, opening.join(" ")),
        (Speaker::Agent, ask),
        (Speaker::Customer, confirm),
        (Speaker::Agent, close),
    ];
    let dialog = Dialog::from_turns(id, turns).expect("synthetic dialogs are valid");
    let resolution_index =
        dialog.sentences.iter().find(|s| s.utterance == 3).map(|s| s.index).expect("closing turn has a sentence");
    LabeledExample::new(dialog, vec![vec![issue_index, resolution_index]]).expect("synthetic reference is valid")
}

/// `n` dialogs with ids `syn-<seed>-<i>`.
pub fn generate(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| dialog(&format!("syn-{seed}-{i:05}"), &mut rng)).collect()
}

pub fn generate_split(train: usize, validation: usize, test: usize, seed: u64) -> DatasetSplit {
    let mut all = generate(train + validation + test, seed);
    let test_part = all.split_off(train + validation);
    let validation_part = all.split_off(train);
    DatasetSplit { train: all, validation: validation_part, test: test_part }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points_at_issue_and_resolution() {
        for ex in generate(40, 5) {
            let r = &ex.references[0];
            assert_eq!(r.indices[0], 2);
            let s = ex.dialog.sentences.get(r.indices[1]).unwrap();
            assert_eq!(s.speaker, Speaker::Agent);
            assert_eq!(ex.dialog.utterances.len(), 4);
        }
    }

    #[test]
    fn deterministic_and_unique_ids() {
        assert_eq!(generate(10, 9), generate(10, 9));
        let split = generate_split(5, 2, 3, 1);
        assert_eq!(split.sizes(), (5, 2, 3));
        split.validate().unwrap();
    }
}
