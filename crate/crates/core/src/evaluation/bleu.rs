use std::collections::HashMap;

use crate::error::{Error, Result};

/// Corpus-level BLEU-4 with its ingredients.
#[derive(Clone, Debug, PartialEq)]
pub struct Bleu {
    /// In `[0, 100]`.
    pub score: f64,
    pub precisions: [f64; 4],
    pub matches: [usize; 4],
    pub totals: [usize; 4],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngrams(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(|s| s.to_string()).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Single-reference corpus BLEU over whitespace tokens: clipped n-gram
/// precisions for n = 1..4, geometric mean, brevity penalty
/// `min(1, exp(1 - r/c))`, no smoothing. An order for which the hypotheses
/// contain no n-grams at all (every hypothesis shorter than n) is left out of
/// the mean, so identical corpora of short sentences still score 100.
pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<Bleu> {
    if hypotheses.len() != references.len() {
        return Err(Error::Input(format!(
            "{} hypotheses for {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut c, mut r) = (0, 0);
    for (i, (h, rf)) in hypotheses.iter().zip(references).enumerate() {
        let ht: Vec<&str> = h.as_ref().split_whitespace().collect();
        let rt: Vec<&str> = rf.as_ref().split_whitespace().collect();
        if rt.is_empty() {
            return Err(Error::Input(format!("reference {} is empty", i + 1)));
        }
        c += ht.len();
        r += rt.len();
        for n in 1..=4 {
            let hc = ngrams(&ht, n);
            let rc = ngrams(&rt, n);
            totals[n - 1] += ht.len().saturating_sub(n - 1);
            matches[n - 1] += hc.iter().map(|(g, k)| (*k).min(rc.get(g).copied().unwrap_or(0))).sum::<usize>();
        }
    }
    let precisions: [f64; 4] =
        std::array::from_fn(|n| if totals[n] == 0 { 0.0 } else { matches[n] as f64 / totals[n] as f64 });
    let brevity_penalty = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let used: Vec<usize> = (0..4).filter(|&n| totals[n] > 0).collect();
    let score = if used.is_empty() || used.iter().any(|&n| matches[n] == 0) {
        0.0
    } else {
        let log_mean = used.iter().map(|&n| precisions[n].ln()).sum::<f64>() / used.len() as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(Bleu {
        score,
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len: c,
        ref_len: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_100() {
        let h = ["a b c d e", "the cat sat", "x"];
        assert_eq!(corpus_bleu(&h, &h).unwrap().score, 100.0);
    }

    #[test]
    fn empty_hypotheses() {
        assert_eq!(corpus_bleu(&["", ""], &["a b", "c"]).unwrap().score, 0.0);
        assert!(corpus_bleu(&["a"], &[" "]).is_err());
        assert!(corpus_bleu(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn two_sentence_worksheet() {
        let b = corpus_bleu(
            &["the cat sat on the mat today", "a small dog runs very fast"],
            &["the cat sat on the red mat today", "a small dog runs fast"],
        )
        .unwrap();
        assert_eq!(b.matches, [12, 8, 5, 3]);
        assert_eq!(b.totals, [13, 11, 9, 7]);
        assert!((b.score - 63.229_751_689_778_861_3).abs() < 1e-9, "{}", b.score);
    }

    #[test]
    fn brevity_penalty_worksheet() {
        let b = corpus_bleu(
            &["the cat sat on the mat", "a small dog runs fast"],
            &["the cat sat on the red mat today", "a small dog runs very fast"],
        )
        .unwrap();
        assert_eq!((b.hyp_len, b.ref_len), (11, 14));
        assert!((b.brevity_penalty - 0.761_300_386_696_873_7).abs() < 1e-12);
        assert!((b.score - 57.846_320_131_264_161_4).abs() < 1e-9, "{}", b.score);
    }

    #[test]
    fn repeated_token_worksheet() {
        // clipped unigrams 2/4, bigrams 1/3, trigrams 0/2: score 0
        let b = corpus_bleu(&["the the the cat"], &["the cat sat"]).unwrap();
        assert_eq!(b.matches, [2, 1, 0, 0]);
        assert_eq!(b.totals, [4, 3, 2, 1]);
        assert_eq!(b.brevity_penalty, 1.0);
        assert_eq!(b.score, 0.0);
    }
}
