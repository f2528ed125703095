//! Corpus pipeline against brute-force and hand-traced oracles.

mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgmt::corpus::{
    aggregate_votes, build_context_corpus, build_splits, collect_translation_sets, flag_ambiguous_samples,
    krippendorff_alpha, select_ambiguous_sets, AmbiguitySelectionConfig, BaselineScorer, Choice, ClipOwner,
    Decision, VoteRecord,
};

#[test]
fn translation_sets_match_pairwise_scan() {
    for seed in 0..100 {
        let rs = random_corpus(seed);
        assert_eq!(sets_as_map(&rs), brute_force_sets(&rs), "seed {seed}");
        let sets = collect_translation_sets(&rs);
        assert_eq!(flag_ambiguous_samples(&rs, &sets), brute_force_flags(&rs), "seed {seed}");
    }
}

#[test]
fn hand_traced_selection() {
    for (i, c) in selection_cases().iter().enumerate() {
        let got = run_selection_case(c).map(|(a, b, l, s, _)| (a, b, l, s));
        let want = c.expect.map(|(a, b, l, s)| (a.to_string(), b.to_string(), l, s));
        assert_eq!(got, want, "case {i}");
    }
}

#[test]
fn selected_record_ids_follow_target_order() {
    let c = &selection_cases()[19];
    let (_, _, _, _, ids) = run_selection_case(c).unwrap();
    assert_eq!(ids, ["r1".to_string(), "r0".to_string()]);
}

#[test]
fn textbook_alpha() {
    // four observers, twelve units, `.` = missing
    let rows = [
        "1 2 3 3 2 1 4 1 2 . . .",
        "1 2 3 3 2 2 4 1 2 5 . 3",
        ". 3 3 3 2 3 4 2 2 5 1 .",
        "1 2 3 3 2 4 4 1 2 5 1 .",
    ];
    let cells: Vec<Vec<&str>> = rows.iter().map(|r| r.split(' ').collect()).collect();
    let units: Vec<Vec<&str>> = (0..12)
        .map(|u| cells.iter().map(|r| r[u]).filter(|v| *v != ".").collect())
        .collect();
    let alpha = krippendorff_alpha(&units).unwrap();
    assert!((alpha - 113.0 / 152.0).abs() < 1e-12, "{alpha}");
}

#[test]
fn random_ratings_have_alpha_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let units: Vec<Vec<Choice>> = (0..1000)
        .map(|_| (0..3).map(|_| Choice::ALL[rng.random_range(0..4)]).collect())
        .collect();
    let a = krippendorff_alpha(&units).unwrap();
    assert!(a.abs() < 0.05, "{a}");
}

#[test]
fn every_vote_combination() {
    for owner in [ClipOwner::First, ClipOwner::Second] {
        for &a in &Choice::ALL {
            for &b in &Choice::ALL {
                for &c in &Choice::ALL {
                    let votes: Vec<VoteRecord> = [a, b, c]
                        .iter()
                        .enumerate()
                        .map(|(i, &choice)| VoteRecord {
                            task_id: "t".into(),
                            clip_owner: owner,
                            worker_id: format!("w{i}"),
                            choice,
                        })
                        .collect();
                    let wanted = if owner == ClipOwner::First { Choice::First } else { Choice::Second };
                    let hits = [a, b, c].iter().filter(|&&x| x == wanted).count();
                    let expect = if hits >= 2 { Decision::Helpful } else { Decision::NotHelpful };
                    assert_eq!(aggregate_votes(&votes).unwrap()["t"], expect);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn removing_a_record_never_adds_a_set(seed in 0u64..10_000, drop in 0usize..200) {
        let rs = random_corpus(seed);
        prop_assume!(!rs.is_empty());
        let before = sets_as_map(&rs);
        let mut fewer = rs.clone();
        fewer.remove(drop % rs.len());
        for source in sets_as_map(&fewer).keys() {
            prop_assert!(before.contains_key(source));
        }
    }

    #[test]
    fn selection_respects_thresholds(seed in 0u64..10_000) {
        let rs = random_corpus(seed);
        let sets = collect_translation_sets(&rs);
        let ids: Vec<String> = rs.iter().map(|r| r.id.clone()).collect();
        let config = AmbiguitySelectionConfig { target_threshold: 0.5, ..Default::default() };
        let scorer = BaselineScorer { records: &rs };
        let out = select_ambiguous_sets(&sets, &ids, &scorer, &config).unwrap();
        prop_assert!(out.len() <= sets.len());
        let mut seen = std::collections::HashSet::new();
        for a in &out {
            prop_assert!(seen.insert(a.source_text.clone()));
            prop_assert!(a.pair_similarity < 0.5);
            for id in &a.record_ids {
                let r = rs.iter().find(|r| &r.id == id).unwrap();
                prop_assert!(vgmt::corpus::baseline_similarity(&r.source_text, &r.target_text) > a.level);
            }
        }
    }

    #[test]
    fn alpha_is_bounded(units in proptest::collection::vec(proptest::collection::vec(0u8..4, 2..5), 1..40)) {
        let a = krippendorff_alpha(&units).unwrap();
        prop_assert!((-1.0..=1.0).contains(&a), "{}", a);
    }

    #[test]
    fn perfect_agreement_is_one(units in proptest::collection::vec((0u8..5, 2usize..5), 1..30)) {
        let units: Vec<Vec<u8>> = units.into_iter().map(|(v, n)| vec![v; n]).collect();
        prop_assert_eq!(krippendorff_alpha(&units).unwrap(), 1.0);
    }

    #[test]
    fn splits_partition_the_corpus(n in 0usize..60, helpful in proptest::collection::vec(any::<bool>(), 60), seed in any::<u64>()) {
        let rs: Vec<_> = (0..n).map(|i| record(&format!("r{i}"), "s", "t")).collect();
        let decisions: BTreeMap<String, Decision> = (0..n)
            .map(|i| (format!("r{i}"), if helpful[i] { Decision::Helpful } else { Decision::NotHelpful }))
            .collect();
        let s = build_splits(&rs, &decisions, seed, None);
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for &i in s.validation.iter().chain(&s.test) {
            prop_assert!(helpful[i]);
        }
        prop_assert!(s.validation.len() == s.test.len() || s.validation.len() == s.test.len() + 1);
    }

    #[test]
    fn context_keeps_count_and_targets(seed in 0u64..10_000) {
        let mut rs = random_corpus(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in rs.iter_mut() {
            r.video_id = format!("v{}", rng.random_range(0..5));
            r.start_ms = rng.random_range(0..100_000);
            r.end_ms = r.start_ms + 500;
        }
        let out = build_context_corpus(&rs);
        prop_assert_eq!(out.len(), rs.len());
        for (a, b) in out.iter().zip(&rs) {
            prop_assert_eq!(&a.target_text, &b.target_text);
            prop_assert!(a.source_text.contains(b.source_text.trim()));
            prop_assert!(a.source_text.matches("<sep>").count() <= 4);
        }
    }
}
