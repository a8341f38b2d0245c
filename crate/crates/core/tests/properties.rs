use std::collections::HashSet;

use dialsum::backends::{CompletionResult, TfIdfEmbedder, TokenLogprob};
use dialsum::corpus::{merge_pools, subsample_labeled, synthetic};
use dialsum::matching::to_extractive;
use dialsum::metrics::{rouge_l, rouge_n, score_pair, tokenize_for_rouge, RougeConfig};
use dialsum::prompting::{parse_qa_answer, render_answer_line, split_by_role, ParsedAnswer};
use dialsum::scoring::{select_random_k, select_top_k};
use dialsum::segment::normalize;
use dialsum::{Dialog, PseudoLabelCandidate, Speaker, Utterance};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}",
        "[A-Z][a-z]{1,6}",
        "[0-9]{1,4}",
        Just("e.g.".to_string()),
        Just("Dr.".to_string()),
        Just("https://x.co/a.b".to_string()),
        Just("3.5".to_string()),
        Just("\u{1F600}".to_string()),
    ]
}

fn utterance_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        (prop::collection::vec(word(), 1..8), prop_oneof![Just("."), Just("?"), Just("!"), Just("")]),
        1..4,
    )
    .prop_map(|sentences| {
        sentences.into_iter().map(|(words, end)| format!("{}{end}", words.join(" "))).collect::<Vec<_>>().join(" ")
    })
}

fn dialog() -> impl Strategy<Value = Dialog> {
    prop::collection::vec((any::<bool>(), utterance_text()), 1..6).prop_map(|turns| {
        let utterances = turns
            .into_iter()
            .map(|(agent, text)| Utterance { speaker: if agent { Speaker::Agent } else { Speaker::Customer }, text })
            .collect();
        Dialog::new("p", utterances).unwrap()
    })
}

fn tokens() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(str::to_string), 0..12)
}

fn candidates(n: usize, scores: &[i8]) -> Vec<PseudoLabelCandidate> {
    synthetic::generate(n, 3)
        .into_iter()
        .zip(scores)
        .map(|(ex, &s)| {
            let answer = ParsedAnswer::from_indices(vec![1], vec![], f64::from(s) * 0.5);
            PseudoLabelCandidate::new(ex.dialog, answer, false).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sentences_are_numbered_contiguously(d in dialog()) {
        prop_assert!(!d.sentences.is_empty());
        for (i, s) in d.sentences.iter().enumerate() {
            prop_assert_eq!(s.index, i + 1);
            prop_assert!(!s.text.is_empty());
            prop_assert_eq!(s.text.trim(), s.text.as_str());
            prop_assert!(d.utterances[s.utterance].text.contains(&s.text));
            prop_assert_eq!(s.speaker, d.utterances[s.utterance].speaker);
        }
        let utterances: Vec<usize> = d.sentences.iter().map(|s| s.utterance).collect();
        prop_assert!(utterances.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dialog_serde_round_trip(d in dialog()) {
        let json = serde_json::to_string(&d).unwrap();
        let back: Dialog = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn normalize_is_idempotent(text in utterance_text()) {
        let once = normalize(&text);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn rouge_bounds_and_symmetry(a in tokens(), b in tokens()) {
        for n in [1, 2] {
            let ab = rouge_n(&a, &b, n);
            let ba = rouge_n(&b, &a, n);
            prop_assert!((0.0..=1.0).contains(&ab.f1));
            prop_assert_eq!(ab.f1, ba.f1);
            prop_assert_eq!(ab.precision, ba.recall);
        }
        let l = rouge_l(&a, &b);
        prop_assert!((0.0..=1.0).contains(&l.f1));
        prop_assert_eq!(l.f1, rouge_l(&b, &a).f1);
        prop_assert!(l.f1 <= rouge_n(&a, &b, 1).f1 + 1e-12);
    }

    #[test]
    fn truncation_ignores_tail(cand in "[a-d ]{0,40}", extra in "[a-d ]{1,20}", reference in "[a-d ]{1,40}") {
        let limit = tokenize_for_rouge(&cand).len().max(1);
        let with_tail = format!("{cand} {extra}");
        if tokenize_for_rouge(&cand).is_empty() {
            return Ok(());
        }
        let config = RougeConfig::default();
        prop_assert_eq!(score_pair(&with_tail, &reference, limit, config), score_pair(&cand, &reference, limit, config));
    }

    #[test]
    fn answer_line_round_trips(d in dialog(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..5)) {
        let n = d.n_sentences();
        let mut indices: Vec<usize> = picks.iter().map(|p| p.index(n) + 1).collect();
        indices.sort_unstable();
        indices.dedup();
        let (customer, agent) = split_by_role(&d, &indices);
        let line = render_answer_line(&customer, &agent);
        let completion = CompletionResult {
            text: line.clone(),
            tokens: line.split_inclusive(' ').map(|t| TokenLogprob { text: t.to_string(), logprob: -0.5 }).collect(),
        };
        let parsed = parse_qa_answer(&completion, n).unwrap();
        prop_assert_eq!(&parsed.customer_indices, &customer);
        prop_assert_eq!(&parsed.agent_indices, &agent);
        prop_assert_eq!(parsed.number_token_spans.len(), indices.len());
    }

    #[test]
    fn parser_never_panics(text in ".{0,80}", n in 0usize..20) {
        let completion = CompletionResult {
            text: text.clone(),
            tokens: text.chars().map(|c| TokenLogprob { text: c.to_string(), logprob: -1.0 }).collect(),
        };
        if let Ok(a) = parse_qa_answer(&completion, n) {
            prop_assert!(a.customer_indices.iter().chain(&a.agent_indices).all(|&i| i >= 1 && i <= n));
        }
    }

    #[test]
    fn top_k_takes_the_best_unselected(
        scores in prop::collection::vec(-6i8..1, 0..40),
        k in 0usize..20,
        taken in prop::collection::vec(any::<prop::sample::Index>(), 0..10),
    ) {
        let cands = candidates(scores.len(), &scores);
        let already: HashSet<String> = if cands.is_empty() {
            HashSet::new()
        } else {
            taken.iter().map(|t| cands[t.index(cands.len())].id().to_string()).collect()
        };
        let eligible = cands.iter().filter(|c| !already.contains(c.id())).count();
        let picks = select_top_k(&cands, k, &already);
        prop_assert_eq!(picks.len(), k.min(eligible));
        let ids: HashSet<&str> = picks.iter().map(|c| c.id()).collect();
        prop_assert_eq!(ids.len(), picks.len());
        prop_assert!(ids.iter().all(|id| !already.contains(*id)));
        let floor = picks.iter().map(|c| c.score).fold(f64::INFINITY, f64::min);
        for c in cands.iter().filter(|c| !already.contains(c.id()) && !ids.contains(c.id())) {
            prop_assert!(c.score <= floor);
        }
        let mut reversed = cands.clone();
        reversed.reverse();
        prop_assert_eq!(select_top_k(&reversed, k, &already), picks);
    }

    #[test]
    fn random_k_is_seeded_and_without_replacement(n in 0usize..40, k in 0usize..20, seed in any::<u64>()) {
        let cands = candidates(n, &vec![0; n]);
        let a = select_random_k(&cands, k, &HashSet::new(), seed);
        let mut shuffled = cands.clone();
        shuffled.rotate_left(n / 2);
        let b = select_random_k(&shuffled, k, &HashSet::new(), seed);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), k.min(n));
        let ids: HashSet<&str> = a.iter().map(|c| c.id()).collect();
        prop_assert_eq!(ids.len(), a.len());
    }

    #[test]
    fn pools_stay_disjoint(n in 0usize..60, fraction in 0.0f64..=1.0, seed in any::<u64>(), k in 0usize..30) {
        let train = synthetic::generate(n, 9);
        let pools = subsample_labeled(&train, fraction, seed).unwrap();
        prop_assert_eq!(pools.labeled.len(), ((fraction * n as f64) + 1e-9).floor() as usize);
        prop_assert_eq!(pools.total_len(), n);
        let cands: Vec<PseudoLabelCandidate> = pools
            .unlabeled
            .iter()
            .map(|d| PseudoLabelCandidate::new(d.clone(), ParsedAnswer::from_indices(vec![1], vec![], -1.0), false).unwrap())
            .collect();
        let picks = select_top_k(&cands, k, &pools.selected_ids());
        let merged = merge_pools(&pools, &picks).unwrap();
        prop_assert_eq!(merged.total_len(), n);
        prop_assert_eq!(merged.training_len(), pools.labeled.len() + picks.len());
        let mut ids = HashSet::new();
        for id in merged.labeled.iter().map(|e| e.id()).chain(merged.unlabeled.iter().map(|d| d.id.as_str())).chain(merged.selected.iter().map(|c| c.id())) {
            prop_assert!(ids.insert(id.to_string()));
        }
        prop_assert!(merge_pools(&merged, &picks).is_err() || picks.is_empty());
    }

    #[test]
    fn verbatim_sentences_map_to_themselves(seed in 0u64..500, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..4)) {
        let ex = synthetic::generate(1, seed).remove(0);
        let d = &ex.dialog;
        let texts: Vec<String> = d.sentences.iter().map(|s| s.text.clone()).collect();
        let embedder = TfIdfEmbedder::fit(&texts).unwrap();
        let mut chosen: Vec<usize> = Vec::new();
        for p in &picks {
            let i = p.index(d.n_sentences()) + 1;
            // The matcher reports the first sentence carrying a given text.
            let canonical = d.sentences.iter().find(|s| s.text == d.sentences.get(i).unwrap().text).unwrap().index;
            if !chosen.contains(&canonical) {
                chosen.push(canonical);
            }
        }
        let generated = chosen.iter().map(|&i| d.sentences.get(i).unwrap().text.as_str()).collect::<Vec<_>>().join(" ");
        let summary = to_extractive(&generated, d, &embedder).unwrap();
        prop_assert_eq!(&summary.indices, &chosen);
        prop_assert_eq!(to_extractive(&summary.text, d, &embedder).unwrap(), summary);
    }
}
