//! Binary parameter checkpoints.
//!
//! Layout: `b"SAFA"`, format version as little-endian `u32`, then one entry
//! per parameter until end of file:
//!
//! ```text
//! u16 name length | UTF-8 name | u8 rank | rank x u64 dims | f64 values (LE, row-major)
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use super::tensor::{ParamSet, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SAFA";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(params: &ParamSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + params.num_values() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for (name, t) in params.iter() {
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::Input(format!("parameter name too long: {name}")))?;
        let rank = u8::try_from(t.shape().len())
            .map_err(|_| Error::Input(format!("rank too large for `{name}`")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(rank);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decode a checkpoint. Every tensor comes back with `requires_grad` set.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<ParamSet> {
    let bad = |m: &str| Error::format(origin, m);
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let mut word = [0u8; 4];
    cur.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported format version {version}")));
    }
    let mut params = ParamSet::new();
    while (cur.position() as usize) < bytes.len() {
        let mut b2 = [0u8; 2];
        cur.read_exact(&mut b2).map_err(|_| bad("truncated entry"))?;
        let mut name = vec![0u8; u16::from_le_bytes(b2) as usize];
        cur.read_exact(&mut name).map_err(|_| bad("truncated name"))?;
        let name = String::from_utf8(name).map_err(|_| bad("parameter name is not UTF-8"))?;
        let mut rank = [0u8; 1];
        cur.read_exact(&mut rank).map_err(|_| bad("truncated rank"))?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            let mut b8 = [0u8; 8];
            cur.read_exact(&mut b8).map_err(|_| bad("truncated dims"))?;
            shape.push(u64::from_le_bytes(b8) as usize);
        }
        let n: usize = shape.iter().product();
        let remaining = bytes.len() - cur.position() as usize;
        if n.checked_mul(8).is_none_or(|need| need > remaining) {
            return Err(bad(&format!("truncated values for `{name}`")));
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let mut b8 = [0u8; 8];
            cur.read_exact(&mut b8).map_err(|_| bad("truncated values"))?;
            data.push(f64::from_le_bytes(b8));
        }
        params.insert(name, Tensor::new(shape, data)?.with_grad());
    }
    Ok(params)
}

pub fn save(params: &ParamSet, path: &Path) -> Result<()> {
    fs::write(path, encode(params)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ParamSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
