//! Corpus BLEU with its n-gram statistics.
//!
//! cargo run --example bleu_scoring

use vgmt::evaluation::corpus_bleu;

fn main() -> vgmt::Result<()> {
    let hyps = ["the cat sat on the mat", "a small dog runs fast"];
    let refs = ["the cat sat on the red mat today", "a small dog runs very fast"];
    let b = corpus_bleu(&hyps, &refs)?;
    for n in 0..4 {
        println!("{}-grams {}/{} = {:.4}", n + 1, b.matches[n], b.totals[n], b.precisions[n]);
    }
    println!("lengths {} / {}, brevity penalty {:.4}", b.hyp_len, b.ref_len, b.brevity_penalty);
    println!("BLEU {:.2}", b.score);
    println!("identity {:.2}", corpus_bleu(&refs, &refs)?.score);
    Ok(())
}
