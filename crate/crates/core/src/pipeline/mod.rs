//! Dataset preparation: face extraction from landmarked head scans and a
//! parametric synthetic head generator.

mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use synth::{
    synth_dataset, synth_dataset_with, synth_scan, synth_scan_with, SynthFactors, DEFAULT_NOISE_SIGMA, SYNTH_HALF_SAMPLES,
};

use crate::formats::ScanRecord;
use crate::geometry::{
    align_tragions, center, crop_face, orient_forward, resample, GeometryError, PointCloud,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("scan {0:?} has no landmarks")]
    MissingLandmarks(String),
    #[error("invalid preprocessing config: {0}")]
    Config(String),
    #[error("scan {id:?}: {source}")]
    Geometry {
        id: String,
        #[source]
        source: GeometryError,
    },
    #[error("invalid synthetic factors: {0}")]
    Factors(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub target_points: usize,
    /// Points this far below the cervicale are still kept (meters).
    pub chin_margin: f64,
    pub seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_points: 10_000,
            chin_margin: 0.04,
            seed: 0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.target_points == 0 {
            return Err(PipelineError::Config("target_points must be >= 1".into()));
        }
        if !(self.chin_margin >= 0.0 && self.chin_margin.is_finite()) {
            return Err(PipelineError::Config("chin_margin must be >= 0".into()));
        }
        Ok(())
    }
}

/// Align, orient, crop, center, resample to `target_points`, then center the
/// resampled cloud so its own centroid is the origin.
pub fn extract_face(scan: &ScanRecord, cfg: &PreprocessConfig) -> Result<PointCloud, PipelineError> {
    cfg.validate()?;
    let id = scan.id();
    let lm = scan
        .meta
        .landmarks
        .ok_or_else(|| PipelineError::MissingLandmarks(id.to_string()))?;
    let geo = |source| PipelineError::Geometry {
        id: id.to_string(),
        source,
    };
    let (cloud, lm) = align_tragions(&scan.cloud, &lm).map_err(geo)?;
    let (cloud, lm) = orient_forward(&cloud, &lm);
    let face = crop_face(&cloud, &lm, cfg.chin_margin).map_err(geo)?;
    let sampled = resample(&center(&face), cfg.target_points, cfg.seed).map_err(geo)?;
    Ok(center(&sampled))
}
