//! Binary parameter checkpoints.
//!
//! Layout (little-endian): `b"EVCK"`, version byte, `u32` block count, then
//! per block `u32` name length, UTF-8 name, `u32` rank, `u64` dims, `f64`
//! values. A 32-byte SHA-256 of everything before it closes the file.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::Parameters;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"EVCK";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub blocks: Vec<(String, Tensor)>,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated EVCK checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Checkpoint {
    pub fn from_model(model: &impl Parameters) -> Self {
        Self {
            blocks: model
                .named_params()
                .into_iter()
                .map(|(n, t)| (n, t.clone()))
                .collect(),
        }
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for (name, t) in &self.blocks {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.payload();
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Hex SHA-256 of the payload, identical to the stored footer.
    pub fn content_hash(&self) -> String {
        hex(&Sha256::digest(self.payload()))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 + 32 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an EVCK checkpoint".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported EVCK version {}", bytes[4])));
        }
        let (payload, footer) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(payload).as_slice() != footer {
            return Err(Error::Format("EVCK content hash mismatch".into()));
        }
        let mut r = Reader {
            bytes: payload,
            pos: 5,
        };
        let count = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("EVCK block name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let data = r
                .take(n.checked_mul(8).ok_or_else(|| Error::Format("EVCK block too large".into()))?)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            blocks.push((name, Tensor::from_vec(&shape, data)?));
        }
        if r.pos != payload.len() {
            return Err(Error::Format("trailing bytes in EVCK checkpoint".into()));
        }
        Ok(Self { blocks })
    }

    pub fn load_into(&self, model: &mut impl Parameters) -> Result<()> {
        model.load_params(&self.blocks)
    }
}

pub fn write_checkpoint(path: &Path, model: &impl Parameters) -> Result<String> {
    let ck = Checkpoint::from_model(model);
    std::fs::write(path, ck.encode())?;
    Ok(ck.content_hash())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::decode(&std::fs::read(path)?)
}
