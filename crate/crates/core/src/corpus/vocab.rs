use std::collections::HashMap;
use std::path::Path;

use super::record::{write_text, SubtitleRecord};
use crate::error::{Error, Result};
use crate::model::special;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn text(self, r: &SubtitleRecord) -> &str {
        match self {
            Side::Source => &r.source_text,
            Side::Target => &r.target_text,
        }
    }
}

/// Token list whose first four entries are the reserved symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(extra: impl IntoIterator<Item = String>) -> Result<Self> {
        let tokens: Vec<String> = special::RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(extra)
            .collect();
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Input(format!("invalid vocabulary token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(special::UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    /// Ids to text, stopping at EOS and dropping PAD and BOS.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .take_while(|&&i| i != special::EOS)
            .filter(|&&i| i != special::PAD && i != special::BOS)
            .map(|&i| self.token(i).unwrap_or(special::RESERVED[special::UNK]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One token per line, reserved entries included.
    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 4 || lines[..4] != special::RESERVED {
            return Err(format!("vocabulary must start with {}", special::RESERVED.join(", ")));
        }
        Self::from_tokens(lines[4..].iter().map(|s| s.to_string())).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|m| Error::format(path, m))
    }
}

/// Keep tokens seen at least `min_count` times, most frequent first, ties in
/// lexicographic order.
pub fn build_vocabulary(records: &[SubtitleRecord], side: Side, min_count: usize) -> Vocabulary {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        for t in side.text(r).split_whitespace() {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && !special::RESERVED.contains(&t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t.to_string())).expect("whitespace-split tokens are valid")
}
