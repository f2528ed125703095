use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::corpus::write_text;
use crate::error::{Error, Result};

/// Provenance of one command run, stored as `key = value` lines.
///
/// Contains no timestamp, so identical runs produce identical manifests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    /// Input path and SHA-256 of its bytes.
    pub inputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_string(),
            seed,
            ..Default::default()
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    /// Record the digest of a file, or of every file below a directory in
    /// name order.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
                .collect::<Result<_>>()?;
            entries.sort();
            for p in entries {
                self.input(&p)?;
            }
        } else {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            self.inputs
                .push((path.display().to_string(), hex::encode(Sha256::digest(&bytes))));
        }
        Ok(self)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = vgmt {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "seed = {}", self.seed);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        for (p, d) in &self.inputs {
            let _ = writeln!(s, "input.sha256 = {d}  {p}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }
}

/// `<out>.manifest`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}
