use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::record::SubtitleRecord;
use super::votes::Decision;

/// Record indices per split, each list in corpus order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn records(records: &[SubtitleRecord], idx: &[usize]) -> Vec<SubtitleRecord> {
        idx.iter().map(|&i| records[i].clone()).collect()
    }
}

/// Records whose id is a helpful task form the evaluation pool. The pool is
/// shuffled with `seed`, optionally cut to `cap`, and halved; validation takes
/// the extra record when the size is odd. Everything else, including pool
/// records beyond the cap, is training data.
pub fn build_splits(
    records: &[SubtitleRecord],
    decisions: &BTreeMap<String, Decision>,
    seed: u64,
    cap: Option<usize>,
) -> Splits {
    let mut pool: Vec<usize> = (0..records.len())
        .filter(|&i| decisions.get(&records[i].id) == Some(&Decision::Helpful))
        .collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    if let Some(c) = cap {
        pool.truncate(c);
    }
    let n_val = pool.len().div_ceil(2);
    let mut validation = pool[..n_val].to_vec();
    let mut test = pool[n_val..].to_vec();
    validation.sort_unstable();
    test.sort_unstable();
    let mut in_eval = vec![false; records.len()];
    for &i in validation.iter().chain(&test) {
        in_eval[i] = true;
    }
    Splits {
        train: (0..records.len()).filter(|&i| !in_eval[i]).collect(),
        validation,
        test,
    }
}
