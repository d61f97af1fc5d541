//! PCF: `"PCF1"`, u32 point count, then `count * 3` f32 coordinates.

use std::path::Path;

use super::{read_file, write_file, ByteReader, FormatError};
use crate::geometry::{Point3, PointCloud};

pub const PCF_MAGIC: &[u8; 4] = b"PCF1";

/// Serializes a cloud; coordinates are narrowed to f32.
pub fn encode_pcf(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + cloud.len() * 12);
    out.extend_from_slice(PCF_MAGIC);
    out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    for p in cloud.points() {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_pcf(bytes: &[u8]) -> Result<PointCloud, FormatError> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4).map_err(|_| FormatError::MagicMismatch {
        expected: "PCF1".into(),
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if magic != PCF_MAGIC {
        return Err(FormatError::MagicMismatch {
            expected: "PCF1".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let n = r.u32()? as usize;
    let needed = n * 12;
    if r.remaining() < needed {
        return Err(FormatError::Truncated {
            needed,
            available: r.remaining(),
        });
    }
    if r.remaining() > needed {
        return Err(FormatError::CountMismatch {
            declared: n,
            actual_bytes: r.remaining(),
        });
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let x = r.f32()? as f64;
        let y = r.f32()? as f64;
        let z = r.f32()? as f64;
        points.push(Point3::new(x, y, z));
    }
    Ok(PointCloud::new(points)?)
}

pub fn write_pcf(cloud: &PointCloud, path: &Path) -> Result<(), FormatError> {
    write_file(path, &encode_pcf(cloud))
}

pub fn read_pcf(path: &Path) -> Result<PointCloud, FormatError> {
    decode_pcf(&read_file(path)?)
}
