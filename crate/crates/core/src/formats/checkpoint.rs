//! Model checkpoints: `"VAE1"`, u32 tensor count, then per tensor a u16
//! name length, UTF-8 name, u8 rank, `rank` u32 dims and row-major f32
//! data; finally a u32 length and the JSON config.

use std::path::Path;

use super::{read_file, write_file, ByteReader, FormatError};
use crate::nn::Tensor;
use crate::vae::VaeConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VAE1";

/// Named parameter tensors plus the config that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: VaeConfig,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

pub fn encode_checkpoint(ckpt: &ModelCheckpoint) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(ckpt.tensors.len() as u32).to_le_bytes());
    for (name, t) in &ckpt.tensors {
        let nb = name.as_bytes();
        let len = u16::try_from(nb.len())
            .map_err(|_| FormatError::Shape(format!("tensor name of {} bytes", nb.len())))?;
        let rank = u8::try_from(t.rank())
            .map_err(|_| FormatError::Shape(format!("{name}: rank {}", t.rank())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(nb);
        out.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| FormatError::Shape(format!("{name}: dim {d}")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let json = serde_json::to_vec(&ckpt.config).expect("config serializes");
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelCheckpoint, FormatError> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4).map_err(|_| FormatError::MagicMismatch {
        expected: "VAE1".into(),
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if magic != CHECKPOINT_MAGIC {
        if &magic[..3] == b"VAE" && magic[3].is_ascii_digit() {
            return Err(FormatError::VersionMismatch {
                expected: 1,
                found: magic[3] - b'0',
            });
        }
        return Err(FormatError::MagicMismatch {
            expected: "VAE1".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| FormatError::Shape(format!("tensor name at byte {} is not UTF-8", r.position())))?
            .to_string();
        let rank = r.u8()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()))
            .ok_or_else(|| {
                FormatError::Shape(format!("{name}: shape {shape:?} exceeds the remaining payload"))
            })?;
        let data = (0..numel).map(|_| r.f32()).collect::<Result<Vec<_>, _>>()?;
        let t = Tensor::new(shape, data).map_err(|e| FormatError::Shape(format!("{name}: {e}")))?;
        tensors.push((name, t));
    }
    let json_len = r.u32()? as usize;
    let json = r.take(json_len)?;
    if r.remaining() != 0 {
        return Err(FormatError::Shape(format!("{} trailing bytes", r.remaining())));
    }
    let config: VaeConfig = serde_json::from_slice(json)
        .map_err(|e| FormatError::Shape(format!("config: {e}")))?;
    Ok(ModelCheckpoint { config, tensors })
}

pub fn write_checkpoint(ckpt: &ModelCheckpoint, path: &Path) -> Result<(), FormatError> {
    write_file(path, &encode_checkpoint(ckpt)?)
}

pub fn read_checkpoint(path: &Path) -> Result<ModelCheckpoint, FormatError> {
    decode_checkpoint(&read_file(path)?)
}
