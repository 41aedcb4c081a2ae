//! On-disk formats.
//!
//! Sample streams are raw little-endian interleaved `f64` pairs (`re, im`)
//! with a JSON sidecar next to them (same stem, `.json` extension). Tap
//! matrices use the same element encoding in column-major order, so one
//! column (one impulse-response snapshot) is contiguous on disk.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TapMatrix;
use crate::signal::{SampleBuffer, C64};

pub const SAMPLE_FORMAT: &str = "cf64le";
pub const MATRIX_FORMAT: &str = "cf64le-column-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub format: String,
    pub sample_rate_hz: f64,
    pub sample_count: usize,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar<M> {
    pub format: String,
    pub rows: usize,
    pub cols: usize,
    pub meta: M,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_complex(values: &[C64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode_complex(bytes: &[u8]) -> Result<Vec<C64>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::Format(format!(
            "{} bytes is not a whole number of complex f64 samples",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect())
}

/// Writes via a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn write_samples(path: &Path, buffer: &SampleBuffer, description: &str) -> Result<()> {
    write_atomic(path, &encode_complex(buffer.samples()))?;
    let sidecar = SampleSidecar {
        format: SAMPLE_FORMAT.to_string(),
        sample_rate_hz: buffer.sample_rate_hz(),
        sample_count: buffer.len(),
        description: description.to_string(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn read_samples(path: &Path) -> Result<(SampleBuffer, SampleSidecar)> {
    let sidecar: SampleSidecar = read_json(&sidecar_path(path))?;
    if sidecar.format != SAMPLE_FORMAT {
        return Err(Error::Format(format!("unsupported sample format {:?}", sidecar.format)));
    }
    let samples = decode_complex(&fs::read(path)?)?;
    if samples.len() != sidecar.sample_count {
        return Err(Error::Format(format!(
            "{}: sidecar says {} samples, file holds {}",
            path.display(),
            sidecar.sample_count,
            samples.len()
        )));
    }
    Ok((SampleBuffer::new(samples, sidecar.sample_rate_hz)?, sidecar))
}

pub fn write_matrix<M: Serialize>(path: &Path, matrix: &TapMatrix, meta: &M) -> Result<()> {
    write_atomic(path, &encode_complex(matrix.as_slice()))?;
    let sidecar = MatrixSidecar {
        format: MATRIX_FORMAT.to_string(),
        rows: matrix.rows(),
        cols: matrix.cols(),
        meta,
    };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn read_matrix<M: DeserializeOwned>(path: &Path) -> Result<(TapMatrix, M)> {
    let sidecar: MatrixSidecar<M> = read_json(&sidecar_path(path))?;
    if sidecar.format != MATRIX_FORMAT {
        return Err(Error::Format(format!("unsupported matrix format {:?}", sidecar.format)));
    }
    let data = decode_complex(&fs::read(path)?)?;
    if data.len() != sidecar.rows * sidecar.cols {
        return Err(Error::Format(format!(
            "{}: expected {}x{} values, file holds {}",
            path.display(),
            sidecar.rows,
            sidecar.cols,
            data.len()
        )));
    }
    if sidecar.cols == 0 {
        return Ok((TapMatrix::zeros(sidecar.rows, 0), sidecar.meta));
    }
    Ok((TapMatrix::from_columns(sidecar.rows, data)?, sidecar.meta))
}
