//! Flat binary feature cache.
//!
//! Layout: `b"EVSF"`, version byte, `u32` rows, `u32` cols (little-endian),
//! then `rows × cols` row-major little-endian `f32` values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"EVSF";
pub const VERSION: u8 = 1;

pub fn encode(t: &Tensor) -> Vec<u8> {
    let (rows, cols) = (t.rows(), t.cols());
    let mut out = Vec::with_capacity(13 + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 13 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not an EVSF feature file".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported EVSF version {}", bytes[4])));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let body = &bytes[13..];
    if body.len() != 4 * rows * cols {
        return Err(Error::Format(format!(
            "EVSF body has {} bytes, expected {}",
            body.len(),
            4 * rows * cols
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Tensor::from_vec(&[rows, cols], data)
}

pub fn write_features(path: &Path, t: &Tensor) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(t))?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
