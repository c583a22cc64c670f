//! Standalone sample streams: headerless little-endian `f32` plus a sidecar
//! JSON with the same stem (`tone.f32le` pairs with `tone.json`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::io::{decode_f32le, encode_f32le};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
}

pub fn sidecar_path(stream: &Path) -> PathBuf {
    stream.with_extension("json")
}

pub fn write_stream(path: &Path, samples: &[f32], sample_rate_hz: f64) -> Result<()> {
    fs::write(path, encode_f32le(samples.iter().copied()))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    let meta = StreamMeta {
        sample_rate_hz,
        n_samples: samples.len(),
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json("stream sidecar", e))?;
    fs::write(&side, text + "\n").map_err(|e| Error::io(format!("writing {}", side.display()), e))
}

pub fn read_stream(path: &Path) -> Result<(Vec<f32>, StreamMeta)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side)
        .map_err(|e| Error::io(format!("reading {}", side.display()), e))?;
    let meta: StreamMeta = serde_json::from_str(&text)
        .map_err(|e| Error::json(format!("parsing {}", side.display()), e))?;
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if bytes.len() != 4 * meta.n_samples {
        return Err(Error::Mismatch(format!(
            "{} declares {} samples but {} holds {} bytes",
            side.display(),
            meta.n_samples,
            path.display(),
            bytes.len()
        )));
    }
    Ok((decode_f32le(&bytes), meta))
}

/// Reads a `{code: frequency_hz}` JSON object.
pub fn read_codebook(path: &Path) -> Result<BTreeMap<u32, f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
}

pub fn write_codebook(path: &Path, codebook: &BTreeMap<u32, f64>) -> Result<()> {
    let text = serde_json::to_string_pretty(codebook).map_err(|e| Error::json("codebook", e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tone.f32le");
        let s = vec![0.0f32, 0.5, -0.25, 1e-8];
        write_stream(&p, &s, 44_100.0).unwrap();
        assert!(dir.path().join("tone.json").exists());
        let (back, meta) = read_stream(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(meta.n_samples, 4);
    }

    #[test]
    fn truncated_stream_is_a_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.f32le");
        write_stream(&p, &[1.0; 8], 10.0).unwrap();
        fs::write(&p, [0u8; 12]).unwrap();
        assert!(matches!(read_stream(&p), Err(Error::Mismatch(_))));
    }

    #[test]
    fn codebook_uses_string_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cb.json");
        fs::write(&p, r#"{"3": 1750.0, "0": 1000}"#).unwrap();
        let cb = read_codebook(&p).unwrap();
        assert_eq!(cb, BTreeMap::from([(0, 1000.0), (3, 1750.0)]));
        write_codebook(&p, &cb).unwrap();
        assert_eq!(read_codebook(&p).unwrap(), cb);
    }
}
