use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::record::{write_text, SubtitleRecord};
use crate::error::{Error, Result};

/// Cosine similarity of character 3-gram count vectors, each string padded
/// with one start and one end marker. Stands in for a sentence-embedding
/// scorer.
pub fn baseline_similarity(a: &str, b: &str) -> f64 {
    let ca = trigrams(a);
    let cb = trigrams(b);
    if ca.is_empty() || cb.is_empty() {
        return 0.0;
    }
    let dot: u64 = ca.iter().map(|(g, n)| n * cb.get(g).copied().unwrap_or(0)).sum();
    let na: u64 = ca.values().map(|n| n * n).sum();
    let nb: u64 = cb.values().map(|n| n * n).sum();
    (dot as f64 / ((na as f64) * (nb as f64)).sqrt()).clamp(0.0, 1.0)
}

fn trigrams(s: &str) -> HashMap<[char; 3], u64> {
    let chars: Vec<char> = std::iter::once('\u{2}')
        .chain(s.chars())
        .chain(std::iter::once('\u{3}'))
        .collect();
    let mut counts = HashMap::new();
    for w in chars.windows(3) {
        *counts.entry([w[0], w[1], w[2]]).or_insert(0) += 1;
    }
    counts
}

/// Similarities consulted by ambiguous-set selection, addressed by corpus
/// record index.
pub trait Similarity: Sync {
    /// Cross-lingual similarity between a record's source and target.
    fn cross(&self, record: usize) -> f64;
    /// Similarity between the targets of two records.
    fn target(&self, a: usize, b: usize) -> f64;
}

/// [`baseline_similarity`] applied to the corpus texts.
pub struct BaselineScorer<'a> {
    pub records: &'a [SubtitleRecord],
}

impl Similarity for BaselineScorer<'_> {
    fn cross(&self, record: usize) -> f64 {
        let r = &self.records[record];
        baseline_similarity(&r.source_text, &r.target_text)
    }

    fn target(&self, a: usize, b: usize) -> f64 {
        baseline_similarity(&self.records[a].target_text, &self.records[b].target_text)
    }
}

/// Dense `n x n` similarity matrix over corpus records.
#[derive(Clone, Debug, PartialEq)]
pub struct SimMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Input(format!("similarity matrix needs {} values, got {}", n * n, data.len())));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("similarity {v} outside [0, 1]")));
        }
        Ok(SimMatrix { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(n, (0..n * n).map(|k| f(k / n, k % n)).collect())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `SIM v1 <n>` header, then `n` whitespace-separated rows.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let n = match parts.as_slice() {
            ["SIM", "v1", n] => n.parse::<usize>().map_err(|e| format!("header size: {e}"))?,
            _ => return Err(format!("bad header `{header}`, expected `SIM v1 <n>`")),
        };
        let data = lines
            .flat_map(str::split_whitespace)
            .map(|t| t.parse::<f64>().map_err(|e| format!("value `{t}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(n, data).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|m| Error::format(path, m))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("SIM v1 {}\n", self.n);
        for row in self.data.chunks(self.n.max(1)) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }
}

/// Precomputed matrices: the diagonal of `cross` holds each record's
/// source/target similarity, `target` holds target/target similarities.
pub struct MatrixScorer {
    pub cross: SimMatrix,
    pub target: SimMatrix,
}

impl MatrixScorer {
    pub fn new(cross: SimMatrix, target: SimMatrix, records: usize) -> Result<Self> {
        if cross.size() != records || target.size() != records {
            return Err(Error::Input(format!(
                "similarity matrices are {}x{} and {}x{}, corpus has {records} records",
                cross.size(),
                cross.size(),
                target.size(),
                target.size()
            )));
        }
        Ok(MatrixScorer { cross, target })
    }
}

impl Similarity for MatrixScorer {
    fn cross(&self, record: usize) -> f64 {
        self.cross.get(record, record)
    }

    fn target(&self, a: usize, b: usize) -> f64 {
        self.target.get(a, b)
    }
}
