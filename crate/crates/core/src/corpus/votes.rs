use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipOwner {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    None,
    First,
    Second,
    Both,
}

impl Choice {
    pub const ALL: [Choice; 4] = [Choice::None, Choice::First, Choice::Second, Choice::Both];
}

/// One worker's answer for one clip.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub task_id: String,
    /// Which displayed subtitle the clip belongs to.
    pub clip_owner: ClipOwner,
    pub worker_id: String,
    pub choice: Choice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Helpful,
    NotHelpful,
}

const HEADER: [&str; 4] = ["task_id", "clip_owner", "worker_id", "choice"];

pub fn parse_votes<R: std::io::Read>(reader: R) -> std::result::Result<Vec<VoteRecord>, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(format!("header must be `{}`", HEADER.join(",")));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e: csv::Error| e.to_string()))
        .collect()
}

pub fn load_votes(path: &Path) -> Result<Vec<VoteRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_votes(f).map_err(|m| Error::format(path, m))
}

pub fn votes_to_string(votes: &[VoteRecord]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for v in votes {
        w.serialize(v).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

/// Group votes by task, keeping input order within a task.
pub fn group_by_task(votes: &[VoteRecord]) -> BTreeMap<&str, Vec<&VoteRecord>> {
    let mut m: BTreeMap<&str, Vec<&VoteRecord>> = BTreeMap::new();
    for v in votes {
        m.entry(v.task_id.as_str()).or_default().push(v);
    }
    m
}

/// A task is helpful when at least two of its three workers picked exactly
/// the subtitle the clip belongs to.
pub fn aggregate_votes(votes: &[VoteRecord]) -> Result<BTreeMap<String, Decision>> {
    let mut out = BTreeMap::new();
    for (task, vs) in group_by_task(votes) {
        if vs.len() != 3 {
            return Err(Error::Aggregation {
                task_id: task.to_string(),
                count: vs.len(),
            });
        }
        let owner = vs[0].clip_owner;
        if vs.iter().any(|v| v.clip_owner != owner) {
            return Err(Error::Input(format!("task `{task}` has votes with different clip owners")));
        }
        let wanted = match owner {
            ClipOwner::First => Choice::First,
            ClipOwner::Second => Choice::Second,
        };
        let agree = vs.iter().filter(|v| v.choice == wanted).count();
        let d = if agree >= 2 { Decision::Helpful } else { Decision::NotHelpful };
        out.insert(task.to_string(), d);
    }
    Ok(out)
}

pub fn decisions_to_string(d: &BTreeMap<String, Decision>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["task_id", "decision"]).expect("in-memory write");
    for (task, dec) in d {
        w.serialize((task, dec)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

pub fn parse_decisions<R: std::io::Read>(reader: R) -> std::result::Result<BTreeMap<String, Decision>, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>() != ["task_id", "decision"] {
        return Err("header must be `task_id,decision`".into());
    }
    rdr.deserialize::<(String, Decision)>()
        .map(|r| r.map_err(|e| e.to_string()))
        .collect()
}

pub fn load_decisions(path: &Path) -> Result<BTreeMap<String, Decision>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_decisions(f).map_err(|m| Error::format(path, m))
}

/// Nominal Krippendorff's alpha from the coincidence matrix. Each unit is the
/// list of values it received; units with fewer than two values are not
/// pairable and are ignored.
pub fn krippendorff_alpha<T: Ord + Clone>(units: &[Vec<T>]) -> Result<f64> {
    let mut coincidence: BTreeMap<(T, T), f64> = BTreeMap::new();
    for unit in units.iter().filter(|u| u.len() >= 2) {
        let w = 1.0 / (unit.len() - 1) as f64;
        for (i, a) in unit.iter().enumerate() {
            for (j, b) in unit.iter().enumerate() {
                if i != j {
                    *coincidence.entry((a.clone(), b.clone())).or_insert(0.0) += w;
                }
            }
        }
    }
    if coincidence.is_empty() {
        return Err(Error::UndefinedAlpha);
    }
    let mut marginals: BTreeMap<T, f64> = BTreeMap::new();
    for ((c, _), o) in &coincidence {
        *marginals.entry(c.clone()).or_insert(0.0) += o;
    }
    let n: f64 = marginals.values().sum();
    let observed: f64 = coincidence.iter().filter(|((c, k), _)| c != k).map(|(_, o)| o).sum();
    if observed == 0.0 {
        return Ok(1.0);
    }
    let expected = n * n - marginals.values().map(|m| m * m).sum::<f64>();
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Alpha over the raw choices of each task.
pub fn alpha_from_votes(votes: &[VoteRecord]) -> Result<f64> {
    let units: Vec<Vec<Choice>> = group_by_task(votes)
        .into_values()
        .map(|vs| vs.iter().map(|v| v.choice).collect())
        .collect();
    krippendorff_alpha(&units)
}
