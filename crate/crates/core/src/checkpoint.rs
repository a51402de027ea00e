//! Binary checkpoints for trained students.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SLDSCKPT"
//! version    u32
//! meta_len   u32, followed by meta_len bytes of JSON metadata
//! count      u32 tensors, each:
//!   name_len u32, name (UTF-8)
//!   rows     u32
//!   cols     u32
//!   values   rows·cols f64
//! ```
//!
//! Every length is checked against the remaining input before use, so
//! decoding arbitrary bytes fails cleanly instead of over-allocating.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::layers::{StudentConfig, StudentNetwork};
use crate::params::ParamStore;
use crate::pipeline::Variant;

pub const MAGIC: &[u8; 8] = b"SLDSCKPT";
pub const VERSION: u32 = 1;
const MAX_NAME_LEN: usize = 1024;

/// Provenance stored with the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub student: StudentConfig,
    pub variant: Variant,
    pub dataset: String,
    pub label_rate: f64,
    pub test_frac: f64,
    pub seed: u64,
    /// Configuration of the run that produced the checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn from_student(student: &StudentNetwork, variant: Variant, dataset: &str, label_rate: f64, test_frac: f64, seed: u64) -> Self {
        Checkpoint {
            meta: CheckpointMeta {
                student: student.config.clone(),
                variant,
                dataset: dataset.to_string(),
                label_rate,
                test_frac,
                seed,
                config: None,
            },
            params: student.params.clone(),
        }
    }

    pub fn with_config(mut self, config: RunConfig) -> Self {
        self.meta.config = Some(config);
        self
    }

    /// Rebuilds the student, checking tensor names and shapes against the
    /// stored configuration.
    pub fn into_student(self) -> Result<StudentNetwork> {
        StudentNetwork::from_params(self.meta.student, self.params)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let mut out = Vec::with_capacity(self.params.num_scalars() * 8 + meta.len() + 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_len(&mut out, meta.len())?;
        out.extend_from_slice(&meta);
        put_len(&mut out, self.params.len())?;
        for (name, value) in self.params.iter() {
            put_len(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_len(&mut out, value.nrows())?;
            put_len(&mut out, value.ncols())?;
            for v in value.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}, expected {VERSION}")));
        }
        let meta_len = r.u32()? as usize;
        let meta_bytes = r.take(meta_len)?;
        let meta: CheckpointMeta =
            serde_json::from_slice(meta_bytes).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let count = r.u32()? as usize;
        let mut params = ParamStore::new();
        for t in 0..count {
            let name_len = r.u32()? as usize;
            if name_len > MAX_NAME_LEN {
                return Err(Error::Checkpoint(format!("tensor {t}: name of {name_len} bytes")));
            }
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint(format!("tensor {t}: name is not UTF-8")))?
                .to_string();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let byte_len = rows
                .checked_mul(cols)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name}: {rows}x{cols} overflows")))?;
            let raw = r.take(byte_len)?;
            let values: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let m = Matrix::from_shape_vec((rows, cols), values)
                .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
            params.add(name, m);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { meta, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::decode(&bytes)
    }
}

fn put_len(out: &mut Vec<u8>, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| Error::Checkpoint(format!("length {n} does not fit in u32")))?;
    out.extend_from_slice(&n.to_le_bytes());
    Ok(())
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
            .ok_or_else(|| {
                Error::Checkpoint(format!(
                    "truncated: need {n} bytes at offset {}, {} available",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
