use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::formats::{Gender, Race, ScanMetadata, ScanRecord};
use crate::geometry::{LandmarkSet, Point3, PointCloud};

pub const DEFAULT_NOISE_SIGMA: f64 = 0.001;
/// Surface samples per side; every sample is mirrored across y = 0.
pub const SYNTH_HALF_SAMPLES: usize = 15_000;

const HEAD_CENTER_Z: f64 = 1.45;
const LATERAL: f64 = 0.075;
const VERTICAL: f64 = 0.12;
const FORWARD: f64 = 0.10;
const BACKWARD: f64 = 0.085;
const EAR_HEIGHT: f64 = 0.55;

/// Ground-truth shape factors of a synthetic head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthFactors {
    /// Lateral scale, in [0.7, 1.3].
    pub width: f64,
    /// Global scale, in [0.8, 1.2].
    pub size: f64,
    /// Forward offset of the lower face in meters, in [0, 0.03].
    pub protrusion: f64,
}

impl SynthFactors {
    pub const WIDTH: (f64, f64) = (0.7, 1.3);
    pub const SIZE: (f64, f64) = (0.8, 1.2);
    pub const PROTRUSION: (f64, f64) = (0.0, 0.03);

    pub fn new(width: f64, size: f64, protrusion: f64) -> Result<Self, PipelineError> {
        let within = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
        if !(within(width, Self::WIDTH) && within(size, Self::SIZE) && within(protrusion, Self::PROTRUSION)) {
            return Err(PipelineError::Factors(format!(
                "width {width}, size {size}, protrusion {protrusion}"
            )));
        }
        Ok(Self { width, size, protrusion })
    }

    pub fn sample(rng: &mut impl Rng) -> Self {
        let mut u = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
        Self {
            width: u(Self::WIDTH),
            size: u(Self::SIZE),
            protrusion: u(Self::PROTRUSION),
        }
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("width".to_string(), self.width),
            ("size".to_string(), self.size),
            ("protrusion".to_string(), self.protrusion),
        ])
    }
}

/// Cubic ease from 0 at `t <= 0` to 1 at `t >= 1`.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Synthetic head with the default sample count.
pub fn synth_scan(factors: &SynthFactors, noise_sigma: f64, seed: u64) -> ScanRecord {
    synth_scan_with(factors, noise_sigma, seed, SYNTH_HALF_SAMPLES)
}

/// Upper half-ellipsoid head (semi-axes `0.075 * width * size` lateral,
/// `0.12 * size` vertical, `0.10 * size` forward and `0.085 * size` back)
/// whose lower face is pushed forward by `protrusion` as a block, with smooth
/// edges at mid-face height and toward the sides.
/// Surface samples are area-uniform on the unit sphere, mirrored across the
/// x-z plane, then jittered by isotropic noise. Tragions sit at the lateral
/// extremes at 55% of head height; the cervicale sits behind and below the
/// head base. Labels are Female/AfricanAmerican; the id is `synth`.
pub fn synth_scan_with(factors: &SynthFactors, noise_sigma: f64, seed: u64, half_samples: usize) -> ScanRecord {
    let s = factors.size;
    let a = LATERAL * factors.width * s;
    let b = VERTICAL * s;
    let (cf, cb) = (FORWARD * s, BACKWARD * s);
    let zc = HEAD_CENTER_Z;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(2 * half_samples);
    let mut mirrored = Vec::with_capacity(half_samples);
    for _ in 0..half_samples {
        let cos_t: f64 = rng.random_range(0.0..1.0);
        let psi: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        let ux = sin_t * psi.cos();
        let uy = sin_t * psi.sin();
        let mut x = if ux >= 0.0 { cf * ux } else { cb * ux };
        let y = a * uy;
        let z = zc + b * cos_t;
        if ux > 0.0 {
            x += factors.protrusion * smoothstep((0.5 - cos_t) / 0.3 + 0.5) * smoothstep(ux / 0.3);
        }
        points.push(Point3::new(x, y, z));
        mirrored.push(Point3::new(x, -y, z));
    }
    points.extend(mirrored);
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).unwrap();
        for p in &mut points {
            *p = *p + Point3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    let ear_z = zc + EAR_HEIGHT * b;
    let ear_y = a * (1.0 - EAR_HEIGHT * EAR_HEIGHT).sqrt();
    let landmarks = LandmarkSet {
        cervicale: Point3::new(-0.3 * cb, 0.0, zc - 0.03),
        tragion_left: Point3::new(0.0, ear_y, ear_z),
        tragion_right: Point3::new(0.0, -ear_y, ear_z),
    };
    let mut meta = ScanMetadata::new("synth", Gender::Female, Race::AfricanAmerican);
    meta.landmarks = Some(landmarks);
    meta.factors = Some(factors.to_map());
    ScanRecord {
        meta,
        cloud: PointCloud::new(points).expect("synthetic points are finite"),
    }
}

/// `count` heads with uniformly sampled factors. Labels cycle through the
/// eight gender x race combinations; ids are `scan_00000`, ...; record `i`
/// is generated with seed `seed + i`.
pub fn synth_dataset(count: usize, seed: u64, noise_sigma: f64) -> Vec<ScanRecord> {
    synth_dataset_with(count, seed, noise_sigma, SYNTH_HALF_SAMPLES)
}

pub fn synth_dataset_with(count: usize, seed: u64, noise_sigma: f64, half_samples: usize) -> Vec<ScanRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<SynthFactors> = (0..count).map(|_| SynthFactors::sample(&mut rng)).collect();
    let combos: Vec<(Gender, Race)> = Gender::ALL
        .iter()
        .flat_map(|&g| Race::ALL.iter().map(move |&r| (g, r)))
        .collect();
    factors
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let mut rec = synth_scan_with(f, noise_sigma, seed.wrapping_add(i as u64), half_samples);
            let (gender, race) = combos[i % combos.len()];
            rec.meta.id = format!("scan_{i:05}");
            rec.meta.gender = gender;
            rec.meta.race = race;
            rec
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn f(w: f64, s: f64, p: f64) -> SynthFactors {
        SynthFactors::new(w, s, p).unwrap()
    }

    #[test]
    fn point_count_and_determinism() {
        let a = synth_scan(&f(1.0, 1.0, 0.01), DEFAULT_NOISE_SIGMA, 5);
        assert!(a.cloud.len() >= 25_000);
        assert_eq!(a, synth_scan(&f(1.0, 1.0, 0.01), DEFAULT_NOISE_SIGMA, 5));
        assert_eq!(a.meta.factors.as_ref().unwrap()["protrusion"], 0.01);
    }

    #[test]
    fn symmetric_without_noise() {
        let r = synth_scan(&f(1.0, 1.0, 0.0), 0.0, 1);
        let pts = r.cloud.points();
        let key = |p: &Point3| (p.x.to_bits(), p.y.abs().to_bits(), p.z.to_bits());
        let n = pts.len() / 2;
        for i in 0..n {
            assert_eq!(key(&pts[i]), key(&pts[i + n]));
            assert_eq!(pts[i].y, -pts[i + n].y);
        }
    }

    #[test]
    fn width_scales_lateral_extent() {
        let extent = |w: f64| {
            let r = synth_scan(&f(w, 1.0, 0.0), 0.0, 2);
            let ys = r.cloud.points().iter().map(|p| p.y);
            ys.clone().fold(f64::MIN, f64::max) - ys.fold(f64::MAX, f64::min)
        };
        let ratio = extent(1.3) / extent(0.7);
        assert!((ratio / (1.3 / 0.7) - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn size_increases_spread() {
        let spread = |s: f64| {
            let c = synth_scan(&f(1.0, s, 0.02), 0.0, 4).cloud;
            let m = c.centroid();
            c.points().iter().map(|p| p.distance(&m)).sum::<f64>() / c.len() as f64
        };
        assert!(spread(0.8) < spread(1.0));
        assert!(spread(1.0) < spread(1.2));
    }

    #[test]
    fn factor_ranges_enforced() {
        assert!(SynthFactors::new(1.4, 1.0, 0.0).is_err());
        assert!(SynthFactors::new(1.0, 0.79, 0.0).is_err());
        assert!(SynthFactors::new(1.0, 1.0, 0.031).is_err());
    }

    #[test]
    fn dataset_labels_round_robin() {
        let d = synth_dataset_with(8, 3, DEFAULT_NOISE_SIGMA, 200);
        let combos: HashSet<(Gender, Race)> = d.iter().map(|r| (r.meta.gender, r.meta.race)).collect();
        assert_eq!(combos.len(), 8);
        let ids: HashSet<&str> = d.iter().map(|r| r.id()).collect();
        assert_eq!(ids.len(), 8);
        assert!(synth_dataset(0, 3, 0.0).is_empty());
        assert_eq!(d, synth_dataset_with(8, 3, DEFAULT_NOISE_SIGMA, 200));
    }

    #[test]
    fn sampled_factors_in_range() {
        let d = synth_dataset_with(50, 9, 0.0, 10);
        for r in &d {
            let m = r.meta.factors.as_ref().unwrap();
            let sf = SynthFactors::new(m["width"], m["size"], m["protrusion"]);
            assert!(sf.is_ok());
        }
    }
}
