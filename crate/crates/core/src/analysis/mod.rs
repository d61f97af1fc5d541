//! Latent-space analysis: the mean face, percentile probes along each latent
//! dimension, k-means with k-means++ seeding, per-demographic exemplar
//! selection and nearest-centroid size assignment.

mod exemplars;
mod export;
mod kmeans;

use std::cmp::Ordering;
use std::collections::HashSet;

use thiserror::Error;

pub use exemplars::{
    assign_size, stratified_exemplars, ClusterExemplar, ExemplarReport, SizeAssignment,
    SkippedGroup, StratifiedReport,
};
pub use export::{distance_csv, scatter_csv, scatter_svg};
pub use kmeans::{kmeans, ClusterResult, KMEANS_MAX_ITER, KMEANS_RESTARTS};

use crate::formats::{Gender, Race};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("empty latent table")]
    EmptyTable,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("row {id:?} has {got} latent values, expected {expected}")]
    Ragged { id: String, expected: usize, got: usize },
    #[error("row {0:?} has a non-finite latent value")]
    NonFinite(String),
    #[error("dimension {dim} out of range for d = {d}")]
    Dimension { dim: usize, d: usize },
    #[error("percentile {0} outside [0, 100]")]
    Percentile(f64),
    #[error("{rows} rows cannot form {k} clusters")]
    TooFewRows { rows: usize, k: usize },
    #[error("empty exemplar report")]
    EmptyReport,
}

/// One encoded scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentRow {
    pub id: String,
    pub z: Vec<f64>,
    pub gender: Gender,
    pub race: Race,
}

/// Encoded scans with unique ids and a common latent dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTable {
    rows: Vec<LatentRow>,
    dim: usize,
}

impl LatentTable {
    /// Takes the dimension from the first row; an empty table has d = 0.
    pub fn new(rows: Vec<LatentRow>) -> Result<Self, AnalysisError> {
        let d = rows.first().map_or(0, |r| r.z.len());
        Self::with_dim(rows, d)
    }

    pub fn with_dim(rows: Vec<LatentRow>, dim: usize) -> Result<Self, AnalysisError> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.id.as_str()) {
                return Err(AnalysisError::DuplicateId(r.id.clone()));
            }
            if r.z.len() != dim {
                return Err(AnalysisError::Ragged {
                    id: r.id.clone(),
                    expected: dim,
                    got: r.z.len(),
                });
            }
            if !r.z.iter().all(|v| v.is_finite()) {
                return Err(AnalysisError::NonFinite(r.id.clone()));
            }
        }
        Ok(Self { rows, dim })
    }

    pub fn rows(&self) -> &[LatentRow] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LatentRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    /// Component-wise arithmetic mean.
    pub fn mean(&self) -> Result<Vec<f64>, AnalysisError> {
        if self.rows.is_empty() {
            return Err(AnalysisError::EmptyTable);
        }
        let mut m = vec![0.0; self.dim];
        for r in &self.rows {
            for (a, v) in m.iter_mut().zip(&r.z) {
                *a += v;
            }
        }
        let n = self.rows.len() as f64;
        Ok(m.into_iter().map(|v| v / n).collect())
    }

    /// Row nearest to `point`; ties go to the lexicographically smallest id.
    pub fn nearest(&self, point: &[f64]) -> Result<&LatentRow, AnalysisError> {
        self.rows
            .iter()
            .map(|r| (sq_dist(&r.z, point), r))
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)))
            .map(|(_, r)| r)
            .ok_or(AnalysisError::EmptyTable)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Id of the scan whose code is nearest the latent mean.
pub fn mean_face(table: &LatentTable) -> Result<String, AnalysisError> {
    let m = table.mean()?;
    Ok(table.nearest(&m)?.id.clone())
}

/// Empirical percentile with linear interpolation between the order
/// statistics around rank `pct / 100 * (n - 1)`.
pub fn percentile(values: &[f64], pct: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(AnalysisError::Percentile(pct));
    }
    if values.is_empty() {
        return Err(AnalysisError::EmptyTable);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let rank = pct / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(v[lo] + (rank - lo as f64) * (v[hi] - v[lo]))
}

/// The latent mean with component `dim` replaced by its `pct` percentile.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub dim: usize,
    pub pct: f64,
    pub point: Vec<f64>,
    pub nearest_id: String,
}

pub fn percentile_probe(table: &LatentTable, dim: usize, pct: f64) -> Result<Probe, AnalysisError> {
    if table.is_empty() {
        return Err(AnalysisError::EmptyTable);
    }
    if dim >= table.dim() {
        return Err(AnalysisError::Dimension { dim, d: table.dim() });
    }
    let column: Vec<f64> = table.rows().iter().map(|r| r.z[dim]).collect();
    let mut point = table.mean()?;
    point[dim] = percentile(&column, pct)?;
    let nearest_id = table.nearest(&point)?.id.clone();
    Ok(Probe { dim, pct, point, nearest_id })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(id: &str, z: &[f64]) -> LatentRow {
        LatentRow {
            id: id.into(),
            z: z.to_vec(),
            gender: Gender::Female,
            race: Race::Asian,
        }
    }

    #[test]
    fn table_invariants() {
        assert!(matches!(
            LatentTable::new(vec![row("a", &[0.0]), row("a", &[1.0])]),
            Err(AnalysisError::DuplicateId(_))
        ));
        assert!(matches!(
            LatentTable::new(vec![row("a", &[0.0]), row("b", &[1.0, 2.0])]),
            Err(AnalysisError::Ragged { .. })
        ));
        assert!(matches!(
            LatentTable::new(vec![row("a", &[f64::NAN])]),
            Err(AnalysisError::NonFinite(_))
        ));
        assert_eq!(LatentTable::with_dim(vec![], 3).unwrap().dim(), 3);
    }

    #[test]
    fn mean_face_examples() {
        let t = LatentTable::new(vec![row("x", &[4.0, 1.0, 2.0])]).unwrap();
        assert_eq!(mean_face(&t).unwrap(), "x");
        let t = LatentTable::new(vec![
            row("r0", &[-1.0, 0.0, 0.0]),
            row("r1", &[1.0, 0.0, 0.0]),
            row("r2", &[0.0, 0.1, 0.0]),
        ])
        .unwrap();
        assert_eq!(mean_face(&t).unwrap(), "r2");
        let t = LatentTable::new(vec![row("b", &[1.0]), row("a", &[-1.0])]).unwrap();
        assert_eq!(mean_face(&t).unwrap(), "a");
        assert_eq!(mean_face(&LatentTable::new(vec![]).unwrap()), Err(AnalysisError::EmptyTable));
    }

    #[test]
    fn percentile_rule() {
        assert!((percentile(&[2.0, 0.0, 1.0], 95.0).unwrap() - 1.9).abs() < 1e-15);
        assert_eq!(percentile(&[3.0, -1.0, 2.0], 0.0).unwrap(), -1.0);
        assert_eq!(percentile(&[3.0, -1.0, 2.0], 100.0).unwrap(), 3.0);
        assert_eq!(percentile(&[5.0], 37.0).unwrap(), 5.0);
        assert!(percentile(&[1.0], 101.0).is_err());
    }

    #[test]
    fn probe_examples() {
        let t = LatentTable::new(vec![
            row("a", &[0.0, 0.0]),
            row("b", &[1.0, 0.2]),
            row("c", &[2.0, -0.2]),
        ])
        .unwrap();
        let p = percentile_probe(&t, 0, 95.0).unwrap();
        assert!((p.point[0] - 1.9).abs() < 1e-15);
        assert_eq!(p.point[1], 0.0);
        assert_eq!(p.nearest_id, "c");
        let med = percentile_probe(&t, 0, 50.0).unwrap();
        assert_eq!(med.nearest_id, mean_face(&t).unwrap());
        assert_eq!(percentile_probe(&t, 1, 0.0).unwrap().point[1], -0.2);
        assert!(matches!(percentile_probe(&t, 2, 5.0), Err(AnalysisError::Dimension { .. })));
    }
}
