//! Shared test oracles and fixtures.
#![allow(dead_code)]

use facefit::formats::ScanMetadata;
use facefit::geometry::PointCloud;
use facefit::pipeline::{extract_face, synth_dataset_with, PreprocessConfig};

/// Average ranks (1-based), ties sharing the mean rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Adjusted Rand index of two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&n| c2(n)).sum();
    let sum_a: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}

/// Preprocessed synthetic faces with labels and ground-truth factors.
pub struct Faces {
    pub clouds: Vec<PointCloud>,
    /// `[width, size, protrusion]` per face.
    pub factors: Vec<[f64; 3]>,
    pub metas: Vec<ScanMetadata>,
}

pub fn synthetic_faces(count: usize, points: usize, seed: u64, half_samples: usize) -> Faces {
    let scans = synth_dataset_with(count, seed, 0.001, half_samples);
    let mut faces = Faces {
        clouds: Vec::with_capacity(count),
        factors: Vec::with_capacity(count),
        metas: Vec::with_capacity(count),
    };
    for (i, s) in scans.iter().enumerate() {
        let cfg = PreprocessConfig {
            target_points: points,
            chin_margin: 0.04,
            seed: seed.wrapping_add(i as u64),
        };
        faces.clouds.push(extract_face(s, &cfg).unwrap());
        let f = s.meta.factors.as_ref().unwrap();
        faces.factors.push([f["width"], f["size"], f["protrusion"]]);
        faces.metas.push(s.meta.clone());
    }
    faces
}
