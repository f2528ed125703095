//! Corpus construction on a small in-memory subtitle corpus: clip windows,
//! translation sets, ambiguity flags, ambiguous-set selection with the
//! baseline scorer, vocabularies and the context corpus.
//!
//! cargo run --example corpus_pipeline

use vgmt::corpus::{
    build_context_corpus, build_vocabulary, collect_translation_sets, compute_clip_window, flag_ambiguous_samples,
    select_ambiguous_sets, AmbiguitySelectionConfig, BaselineScorer, Side, SubtitleRecord,
};

fn rec(id: &str, video: &str, start: u64, source: &str, target: &str) -> SubtitleRecord {
    SubtitleRecord {
        id: id.into(),
        source_text: source.into(),
        target_text: target.into(),
        start_ms: start,
        end_ms: start + 1800,
        video_id: video.into(),
        split_hint: None,
    }
}

fn main() -> vgmt::Result<()> {
    // source and target in the same script so the character scorer sees overlap
    let records = vec![
        rec("a1", "film1", 2_000, "bank by the river", "bank by the river"),
        rec("a2", "film2", 40_000, "bank by the river", "by the river"),
        rec("a3", "film1", 6_000, "look at that", "look at that"),
        rec("a4", "film1", 9_000, "bank by the river", "bank"),
        rec("a5", "film2", 44_000, "go", "leave now"),
    ];
    for r in &records {
        let w = compute_clip_window(r, Some(60_000))?;
        println!("{} -> {} [{} ms, {} ms) {} frames", r.id, w.video_id, w.window_start_ms, w.window_end_ms, w.frame_count);
    }

    let sets = collect_translation_sets(&records);
    for s in &sets {
        println!("set `{}`: {:?} from {:?}", s.source_text, s.targets, s.record_ids);
    }
    println!("flags {:?}", flag_ambiguous_samples(&records, &sets));

    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let scorer = BaselineScorer { records: &records };
    for chosen in select_ambiguous_sets(&sets, &ids, &scorer, &AmbiguitySelectionConfig::default())? {
        println!(
            "ambiguous `{}`: {:?} at level {} (pair similarity {:.3})",
            chosen.source_text, chosen.targets, chosen.level, chosen.pair_similarity
        );
    }

    let vocab = build_vocabulary(&records, Side::Source, 1);
    println!("source vocabulary {:?}", vocab.tokens());
    for r in build_context_corpus(&records).iter().take(2) {
        println!("context {}: {}", r.id, r.source_text);
    }
    Ok(())
}
