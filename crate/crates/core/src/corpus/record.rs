use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One parallel subtitle pair with its timing and video.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtitleRecord {
    pub id: String,
    /// Whitespace-tokenized source subtitle.
    pub source_text: String,
    pub target_text: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_hint: Option<String>,
}

impl SubtitleRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.start_ms >= self.end_ms {
            return Err(format!(
                "record `{}`: start_ms {} is not before end_ms {}",
                self.id, self.start_ms, self.end_ms
            ));
        }
        if self.source_text.trim().is_empty() {
            return Err(format!("record `{}`: empty source_text", self.id));
        }
        if self.target_text.trim().is_empty() {
            return Err(format!("record `{}`: empty target_text", self.id));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Stop at the first malformed line.
    #[default]
    Strict,
    /// Skip malformed lines and report them.
    Lenient,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedCorpus {
    pub records: Vec<SubtitleRecord>,
    /// `(line number, message)` for each skipped line (lenient mode only).
    pub skipped: Vec<(usize, String)>,
}

/// Parse line-delimited JSON records. Blank lines are ignored.
pub fn parse_corpus_str(text: &str, mode: ParseMode) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<SubtitleRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r));
        match (parsed, mode) {
            (Ok(r), _) => out.records.push(r),
            (Err(message), ParseMode::Strict) => return Err(Error::Parse { line: line_no, message }),
            (Err(message), ParseMode::Lenient) => out.skipped.push((line_no, message)),
        }
    }
    Ok(out)
}

pub fn parse_corpus(path: &Path, mode: ParseMode) -> Result<ParsedCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_str(&text, mode).map_err(|e| match e {
        Error::Parse { line, message } => Error::format(path, format!("line {line}: {message}")),
        other => other,
    })
}

/// Serialize records one JSON object per line.
pub fn corpus_to_string(records: &[SubtitleRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn write_corpus(path: &Path, records: &[SubtitleRecord]) -> Result<()> {
    write_text(path, &corpus_to_string(records))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
