use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EVAF";

/// Encode an `frames x dim` clip. Values are stored as `f32`.
pub fn encode_features(frames: usize, dim: usize, data: &[f64]) -> Result<Vec<u8>> {
    if data.len() != frames * dim {
        return Err(Error::Input(format!("{frames}x{dim} clip needs {} values, got {}", frames * dim, data.len())));
    }
    let m = u32::try_from(frames).map_err(|_| Error::Input("too many frames".into()))?;
    let d = u32::try_from(dim).map_err(|_| Error::Input("feature dimension too large".into()))?;
    let mut out = Vec::with_capacity(12 + 4 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Returns `(frames, dim, values)` with values widened to `f64`.
pub fn decode_features(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err("missing EVAF header".into());
    }
    let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != 4 * m * d {
        return Err(format!("{m}x{d} clip needs {} bytes of values, found {}", 4 * m * d, body.len()));
    }
    let data: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err("non-finite feature value".into());
    }
    Ok((m, d, data))
}

pub fn write_features(path: &Path, frames: usize, dim: usize, data: &[f64]) -> Result<()> {
    std::fs::write(path, encode_features(frames, dim, data)?).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes).map_err(|m| Error::format(path, m))
}

/// Location of a record's clip features inside a feature directory.
pub fn feature_path(dir: &Path, record_id: &str) -> PathBuf {
    dir.join(format!("{record_id}.evaf"))
}

/// Round through `f32`, the precision features are stored at.
pub fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

/// Clips stacked contiguously, all `frames x dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipStore {
    pub frames: usize,
    pub dim: usize,
    data: Vec<f64>,
}

impl ClipStore {
    pub fn new(frames: usize, dim: usize) -> Self {
        ClipStore {
            frames,
            dim,
            data: Vec::new(),
        }
    }

    /// Same shape and count, all zeros.
    pub fn zeros_like(other: &ClipStore) -> Self {
        ClipStore {
            frames: other.frames,
            dim: other.dim,
            data: vec![0.0; other.data.len()],
        }
    }

    pub fn push(&mut self, clip: &[f64]) -> Result<usize> {
        if clip.len() != self.frames * self.dim {
            return Err(Error::Input(format!(
                "clip has {} values, store holds {}x{}",
                clip.len(),
                self.frames,
                self.dim
            )));
        }
        self.data.extend_from_slice(clip);
        Ok(self.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.frames * self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn clip(&self, i: usize) -> &[f64] {
        let n = self.frames * self.dim;
        &self.data[i * n..(i + 1) * n]
    }

    /// Load `<dir>/<id>.evaf` for every id; all clips must agree in shape.
    pub fn load_dir<'a>(dir: &Path, ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut store: Option<ClipStore> = None;
        for id in ids {
            let path = feature_path(dir, id);
            let (m, d, data) = read_features(&path)?;
            let s = store.get_or_insert_with(|| ClipStore::new(m, d));
            if (s.frames, s.dim) != (m, d) {
                return Err(Error::format(
                    &path,
                    format!("clip is {m}x{d}, earlier clips are {}x{}", s.frames, s.dim),
                ));
            }
            s.push(&data)?;
        }
        store.ok_or_else(|| Error::Input("no clips to load".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_at_f32() {
        let data = vec![0.1, -2.5, 3.0, 1e-3, 7.25, 0.0];
        let bytes = encode_features(2, 3, &data).unwrap();
        assert_eq!(&bytes[..4], b"EVAF");
        assert_eq!(bytes.len(), 12 + 24);
        let (m, d, back) = decode_features(&bytes).unwrap();
        assert_eq!((m, d), (2, 3));
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(quantize(*a), *b);
        }
        assert!(decode_features(&bytes[..20]).is_err());
        assert!(decode_features(b"EVAX\0\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn store() {
        let mut s = ClipStore::new(2, 2);
        assert_eq!(s.push(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0);
        assert_eq!(s.push(&[5.0, 6.0, 7.0, 8.0]).unwrap(), 1);
        assert!(s.push(&[1.0]).is_err());
        assert_eq!(s.clip(1), &[5.0, 6.0, 7.0, 8.0]);
    }
}
