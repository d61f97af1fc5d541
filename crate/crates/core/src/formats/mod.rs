//! Persistent formats: PLY ingestion, the PCF binary cloud format, JSON scan
//! metadata, latent-code CSV tables and model checkpoints.
//!
//! Every multi-byte integer in the binary formats is little-endian.

mod checkpoint;
mod latents;
mod metadata;
mod pcf;
mod ply;

use std::fmt;
use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, ModelCheckpoint,
    CHECKPOINT_MAGIC,
};
pub use latents::{read_latents, write_latents, decode_latents, encode_latents};
pub use metadata::{
    read_metadata, read_metadata_strict, write_metadata, Gender, Race, ScanMetadata, ScanRecord,
};
pub use pcf::{decode_pcf, encode_pcf, read_pcf, write_pcf, PCF_MAGIC};
pub use ply::{parse_ply, read_ply, write_ply, PlyEncoding};

use crate::geometry::GeometryError;

/// Where in a file a parse problem was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Byte(n) => write!(f, "byte {n}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at {at}: {msg}")]
    Parse { at: Location, msg: String },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    MagicMismatch { expected: String, found: String },
    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { expected: u8, found: u8 },
    #[error("truncated payload: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("declared {declared} points but payload holds {actual_bytes} bytes")]
    CountMismatch { declared: usize, actual_bytes: usize },
    #[error("inconsistent shape header: {0}")]
    Shape(String),
    #[error("metadata: {0}")]
    Metadata(String),
    #[error("latent table: {0}")]
    Latents(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl FormatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        FormatError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(at: Location, msg: impl Into<String>) -> Self {
        FormatError::Parse {
            at,
            msg: msg.into(),
        }
    }
}

/// Bounds-checked little-endian reader over a byte slice.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                needed: n,
                available: self.remaining(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}
