//! Crowd votes to helpful / not-helpful decisions, agreement, and the
//! resulting evaluation splits.
//!
//! cargo run --example crowd_votes

use vgmt::corpus::{aggregate_votes, alpha_from_votes, build_splits, decisions_to_string, parse_votes, SubtitleRecord};

const VOTES: &str = "task_id,clip_owner,worker_id,choice
r0,first,w1,first
r0,first,w2,first
r0,first,w3,both
r1,second,w1,second
r1,second,w2,none
r1,second,w3,first
r2,first,w1,first
r2,first,w2,first
r2,first,w4,first
r3,second,w2,second
r3,second,w3,second
r3,second,w4,none
";

fn main() -> vgmt::Result<()> {
    let votes = parse_votes(VOTES.as_bytes()).map_err(vgmt::Error::Input)?;
    let decisions = aggregate_votes(&votes)?;
    print!("{}", decisions_to_string(&decisions));
    println!("krippendorff alpha {:.4}", alpha_from_votes(&votes)?);

    let records: Vec<SubtitleRecord> = (0..6)
        .map(|i| SubtitleRecord {
            id: format!("r{i}"),
            source_text: "s".into(),
            target_text: "t".into(),
            start_ms: 0,
            end_ms: 1000,
            video_id: "v".into(),
            split_hint: None,
        })
        .collect();
    let s = build_splits(&records, &decisions, 0, None);
    println!("train {:?} validation {:?} test {:?}", s.train, s.validation, s.test);
    Ok(())
}
