//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgmt::corpus::{
    collect_translation_sets, select_ambiguous_sets, AmbiguitySelectionConfig, MatrixScorer, SimMatrix,
    SubtitleRecord,
};

pub fn record(id: &str, source: &str, target: &str) -> SubtitleRecord {
    SubtitleRecord {
        id: id.into(),
        source_text: source.into(),
        target_text: target.into(),
        start_ms: 0,
        end_ms: 1000,
        video_id: "v".into(),
        split_hint: None,
    }
}

/// Up to 200 records over 20 sources and 40 targets, with stray padding.
pub fn random_corpus(seed: u64) -> Vec<SubtitleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=200);
    let pad = |rng: &mut ChaCha8Rng, s: String| match rng.random_range(0..4) {
        0 => format!(" {s}"),
        1 => format!("{s}  "),
        _ => s,
    };
    (0..n)
        .map(|i| {
            let s = format!("src {}", rng.random_range(0..20));
            let t = format!("tgt {}", rng.random_range(0..40));
            let s = pad(&mut rng, s);
            let t = pad(&mut rng, t);
            record(&format!("r{i}"), &s, &t)
        })
        .collect()
}

/// Pairwise scan: a source is ambiguous iff two of its records disagree on
/// the target. Returns `source -> distinct targets`.
pub fn brute_force_sets(records: &[SubtitleRecord]) -> BTreeMap<String, BTreeSet<String>> {
    let mut out = BTreeMap::new();
    for a in records {
        for b in records {
            let (sa, sb) = (a.source_text.trim(), b.source_text.trim());
            if sa == sb && a.target_text.trim() != b.target_text.trim() {
                let targets: BTreeSet<String> = records
                    .iter()
                    .filter(|r| r.source_text.trim() == sa)
                    .map(|r| r.target_text.trim().to_string())
                    .collect();
                out.insert(sa.to_string(), targets);
            }
        }
    }
    out
}

pub fn brute_force_flags(records: &[SubtitleRecord]) -> Vec<bool> {
    records
        .iter()
        .map(|a| {
            records
                .iter()
                .any(|b| a.source_text.trim() == b.source_text.trim() && a.target_text.trim() != b.target_text.trim())
        })
        .collect()
}

pub fn sets_as_map(records: &[SubtitleRecord]) -> BTreeMap<String, BTreeSet<String>> {
    collect_translation_sets(records)
        .into_iter()
        .map(|s| (s.source_text, s.targets.into_iter().collect()))
        .collect()
}

/// A translation set with prescribed similarities and the hand-traced
/// outcome `(first target, second target, level, pair similarity)`.
pub struct SelectionCase {
    pub targets: Vec<&'static str>,
    pub cross: Vec<f64>,
    /// Target similarity for listed pairs (by index); every other pair is 0.9.
    pub pairs: Vec<(usize, usize, f64)>,
    pub expect: Option<(&'static str, &'static str, f64, f64)>,
}

fn case(
    targets: &[&'static str],
    cross: &[f64],
    pairs: &[(usize, usize, f64)],
    expect: Option<(&'static str, &'static str, f64, f64)>,
) -> SelectionCase {
    SelectionCase {
        targets: targets.to_vec(),
        cross: cross.to_vec(),
        pairs: pairs.to_vec(),
        expect,
    }
}

pub fn selection_cases() -> Vec<SelectionCase> {
    let t3 = ["t1", "t2", "t3"];
    let t2 = ["t1", "t2"];
    let t4 = ["t1", "t2", "t3", "t4"];
    let t5 = ["t1", "t2", "t3", "t4", "t5"];
    let all = |n: usize, s: f64| -> Vec<(usize, usize, f64)> {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, s))).collect()
    };
    vec![
        case(&t3, &[0.9, 0.85, 0.4], &[(0, 1, 0.2), (0, 2, 0.1), (1, 2, 0.1)], Some(("t1", "t2", 0.8, 0.2))),
        case(&t3, &[0.9, 0.9, 0.9], &all(3, 0.3), None),
        case(&t2, &[0.35, 0.32], &[(0, 1, 0.0)], Some(("t1", "t2", 0.3, 0.0))),
        case(&t2, &[0.8, 0.9], &[(0, 1, 0.1)], Some(("t1", "t2", 0.7, 0.1))),
        case(&t2, &[0.3, 0.9], &[(0, 1, 0.0)], None),
        case(&t3, &[0.95, 0.95, 0.95], &[(0, 1, 0.25), (0, 2, 0.1), (1, 2, 0.29)], Some(("t1", "t3", 0.8, 0.1))),
        case(&t3, &[0.9, 0.9, 0.9], &[(0, 1, 0.1), (0, 2, 0.1), (1, 2, 0.2)], Some(("t1", "t2", 0.8, 0.1))),
        case(&t3, &[0.9, 0.9, 0.55], &[(0, 1, 0.5), (0, 2, 0.05), (1, 2, 0.05)], Some(("t1", "t3", 0.5, 0.05))),
        case(&t2, &[0.9, 0.2], &[(0, 1, 0.0)], None),
        case(&t4, &[0.61, 0.62, 0.63, 0.64], &[(2, 3, 0.29)], Some(("t3", "t4", 0.6, 0.29))),
        case(&t2, &[0.75, 0.72], &[(0, 1, 0.2999)], Some(("t1", "t2", 0.7, 0.2999))),
        case(&t3, &[0.85, 0.85, 0.45], &[(0, 1, 0.35), (0, 2, 0.0), (1, 2, 0.0)], Some(("t1", "t3", 0.4, 0.0))),
        case(&["zeta", "alpha"], &[0.9, 0.9], &[(0, 1, 0.1)], Some(("alpha", "zeta", 0.8, 0.1))),
        case(&t2, &[0.8, 0.8], &[(0, 1, 0.0)], Some(("t1", "t2", 0.7, 0.0))),
        case(&t5, &[0.99; 5], &{
            let mut p = all(5, 0.31);
            p.push((1, 4, 0.3));
            p
        }, None),
        case(&t5, &[0.99; 5], &[(1, 4, 0.12), (0, 3, 0.12)], Some(("t1", "t4", 0.8, 0.12))),
        case(&t3, &[0.5, 0.5, 0.5], &[(0, 1, 0.1)], Some(("t1", "t2", 0.4, 0.1))),
        case(&t3, &[0.1, 0.1, 0.1], &all(3, 0.0), None),
        case(&t4, &[0.9, 0.85, 0.75, 0.65], &[(0, 1, 0.8), (0, 2, 0.6), (1, 2, 0.2), (0, 3, 0.0)], Some(("t2", "t3", 0.7, 0.2))),
        case(&["b", "a", "c"], &[0.9, 0.9, 0.9], &[(0, 1, 0.1), (0, 2, 0.1), (1, 2, 0.5)], Some(("a", "b", 0.8, 0.1))),
    ]
}

/// Run one case through the library and return
/// `(first target, second target, level, pair similarity, record ids)`.
pub fn run_selection_case(c: &SelectionCase) -> Option<(String, String, f64, f64, [String; 2])> {
    let n = c.targets.len();
    let records: Vec<SubtitleRecord> = c
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| record(&format!("r{i}"), "same source", t))
        .collect();
    let sets = collect_translation_sets(&records);
    assert_eq!(sets.len(), 1);
    let mut target = vec![0.9; n * n];
    for i in 0..n {
        target[i * n + i] = 1.0;
    }
    for &(i, j, s) in &c.pairs {
        target[i * n + j] = s;
        target[j * n + i] = s;
    }
    let cross = SimMatrix::from_fn(n, |i, j| if i == j { c.cross[i] } else { 0.0 }).unwrap();
    let scorer = MatrixScorer::new(cross, SimMatrix::new(n, target).unwrap(), n).unwrap();
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let out = select_ambiguous_sets(&sets, &ids, &scorer, &AmbiguitySelectionConfig::default()).unwrap();
    assert!(out.len() <= 1);
    out.into_iter().next().map(|a| {
        let [x, y] = a.targets;
        (x, y, a.level, a.pair_similarity, a.record_ids)
    })
}
