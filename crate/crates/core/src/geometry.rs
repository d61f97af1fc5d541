//! Geometric operations on point clouds.
//!
//! Coordinates are meters with z vertical (height above the floor), +x forward
//! (nose direction) and y lateral. All operations are pure.

use std::ops::{Add, Mul, Sub};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point cloud must contain at least one point")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("tragion xy-projections coincide; yaw alignment is undefined")]
    DegenerateTragions,
    #[error("crop removed every point")]
    EmptyCrop,
    #[error("resample target must be at least one point")]
    ZeroTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance_sq(&self, other: &Point3) -> f64 {
        (*self - *other).norm_sq()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A non-empty, finite set of points. Order carries no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        Ok(Self { points })
    }

    pub fn from_flat(coords: &[f64]) -> Result<Self, GeometryError> {
        let points = coords
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        centroid_of(&self.points)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.to_array()).collect()
    }

    /// Applies a transform to every point, keeping order.
    pub fn map(&self, f: impl Fn(Point3) -> Point3) -> Self {
        Self {
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }
}

/// Mean of a non-empty slice, accumulated in a fixed order.
fn centroid_of(points: &[Point3]) -> Point3 {
    let mut acc = Point3::ORIGIN;
    for p in points {
        acc = acc + *p;
    }
    acc * (1.0 / points.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub cervicale: Point3,
    pub tragion_left: Point3,
    pub tragion_right: Point3,
}

impl LandmarkSet {
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (i, p) in [self.cervicale, self.tragion_left, self.tragion_right]
            .iter()
            .enumerate()
        {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        if self.tragion_left == self.tragion_right {
            return Err(GeometryError::DegenerateTragions);
        }
        Ok(())
    }

    pub fn tragion_midpoint(&self) -> Point3 {
        (self.tragion_left + self.tragion_right) * 0.5
    }

    pub fn map(&self, f: impl Fn(Point3) -> Point3) -> Self {
        Self {
            cervicale: f(self.cervicale),
            tragion_left: f(self.tragion_left),
            tragion_right: f(self.tragion_right),
        }
    }
}

/// Rotation about the vertical axis through `pivot`.
#[derive(Debug, Clone, Copy)]
pub struct Yaw {
    pivot: Point3,
    cos: f64,
    sin: f64,
}

impl Yaw {
    pub fn new(angle: f64, pivot: Point3) -> Self {
        Self {
            pivot,
            cos: angle.cos(),
            sin: angle.sin(),
        }
    }

    /// Half turn with exact coefficients.
    pub fn half_turn(pivot: Point3) -> Self {
        Self {
            pivot,
            cos: -1.0,
            sin: 0.0,
        }
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        let dx = p.x - self.pivot.x;
        let dy = p.y - self.pivot.y;
        Point3::new(
            self.pivot.x + self.cos * dx - self.sin * dy,
            self.pivot.y + self.sin * dx + self.cos * dy,
            p.z,
        )
    }
}

/// Yaw angle (radians) between the tragion line's xy-projection and the
/// nearest direction along the y-axis. Zero means aligned.
pub fn tragion_misalignment(lm: &LandmarkSet) -> f64 {
    let d = lm.tragion_left - lm.tragion_right;
    // Angle of d measured from +y, folded into (-pi/2, pi/2].
    let mut phi = (-d.x).atan2(d.y);
    if phi > std::f64::consts::FRAC_PI_2 {
        phi -= std::f64::consts::PI;
    } else if phi <= -std::f64::consts::FRAC_PI_2 {
        phi += std::f64::consts::PI;
    }
    phi
}

/// Rotates about the vertical axis through the tragion midpoint so the
/// tragion line is parallel to y. Uses the smaller of the two possible
/// rotations; front/back is settled by [`orient_forward`].
pub fn align_tragions(
    cloud: &PointCloud,
    lm: &LandmarkSet,
) -> Result<(PointCloud, LandmarkSet), GeometryError> {
    lm.validate()?;
    let d = lm.tragion_left - lm.tragion_right;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(GeometryError::DegenerateTragions);
    }
    let phi = tragion_misalignment(lm);
    if phi == 0.0 {
        return Ok((cloud.clone(), *lm));
    }
    let yaw = Yaw::new(-phi, lm.tragion_midpoint());
    let mut aligned_lm = lm.map(|p| yaw.apply(p));
    // Snap the residual rounding so the tragion line is exactly parallel to y.
    let mid_x = aligned_lm.tragion_midpoint().x;
    aligned_lm.tragion_left.x = mid_x;
    aligned_lm.tragion_right.x = mid_x;
    Ok((cloud.map(|p| yaw.apply(p)), aligned_lm))
}

/// Turns the scan to face +x. The face side is taken to be where the
/// centroid of the points above the cervicale lies relative to the tragion
/// midpoint.
pub fn orient_forward(cloud: &PointCloud, lm: &LandmarkSet) -> (PointCloud, LandmarkSet) {
    let cut = lm.cervicale.z;
    let above: Vec<Point3> = cloud.points().iter().copied().filter(|p| p.z > cut).collect();
    if above.is_empty() {
        return (cloud.clone(), *lm);
    }
    let mid = lm.tragion_midpoint();
    if centroid_of(&above).x >= mid.x {
        return (cloud.clone(), *lm);
    }
    let yaw = Yaw::half_turn(mid);
    (cloud.map(|p| yaw.apply(p)), lm.map(|p| yaw.apply(p)))
}

/// Keeps points forward of the tragion plane and above `cervicale.z - chin_margin`.
/// Both predicates are strict.
pub fn crop_face(
    cloud: &PointCloud,
    lm: &LandmarkSet,
    chin_margin: f64,
) -> Result<PointCloud, GeometryError> {
    let plane_x = lm.tragion_midpoint().x;
    let floor_z = lm.cervicale.z - chin_margin;
    let kept: Vec<Point3> = cloud
        .points()
        .iter()
        .copied()
        .filter(|p| p.x > plane_x && p.z > floor_z)
        .collect();
    if kept.is_empty() {
        return Err(GeometryError::EmptyCrop);
    }
    Ok(PointCloud { points: kept })
}

/// Translates the cloud so its centroid is the origin.
pub fn center(cloud: &PointCloud) -> PointCloud {
    let c = cloud.centroid();
    cloud.map(|p| p - c)
}

/// Draws `n` points: without replacement when the cloud has at least `n`
/// points, otherwise uniformly with replacement.
pub fn resample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud, GeometryError> {
    if n == 0 {
        return Err(GeometryError::ZeroTarget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = cloud.points();
    let points: Vec<Point3> = if src.len() >= n {
        index::sample(&mut rng, src.len(), n)
            .into_iter()
            .map(|i| src[i])
            .collect()
    } else {
        (0..n).map(|_| src[rng.random_range(0..src.len())]).collect()
    };
    Ok(PointCloud { points })
}

/// For every point of `a`, the Euclidean distance to its nearest point in `b`.
pub fn nearest_distances(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    a.points()
        .iter()
        .map(|p| {
            b.points()
                .iter()
                .map(|q| p.distance_sq(q))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|&a| a.into()).collect()).unwrap()
    }

    fn lm(c: [f64; 3], l: [f64; 3], r: [f64; 3]) -> LandmarkSet {
        LandmarkSet {
            cervicale: c.into(),
            tragion_left: l.into(),
            tragion_right: r.into(),
        }
    }

    fn pseudo_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(1.3..1.7),
                )
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    fn assert_isometry(a: &PointCloud, b: &PointCloud) {
        for i in 0..a.len() {
            for j in 0..a.len() {
                let da = a.points()[i].distance(&a.points()[j]);
                let db = b.points()[i].distance(&b.points()[j]);
                assert!((da - db).abs() <= 1e-9 * da.max(1e-12), "{da} vs {db}");
            }
        }
    }

    #[test]
    fn empty_and_nonfinite_clouds_rejected() {
        assert_eq!(PointCloud::new(vec![]), Err(GeometryError::EmptyCloud));
        assert_eq!(
            PointCloud::new(vec![Point3::ORIGIN, Point3::new(f64::NAN, 0.0, 0.0)]),
            Err(GeometryError::NonFinite(1))
        );
    }

    #[test]
    fn align_is_identity_when_already_parallel() {
        let c = pseudo_cloud(50, 1);
        let l = lm([0.0, 0.0, 1.4], [0.02, 0.08, 1.6], [0.02, -0.08, 1.6]);
        let (out, out_lm) = align_tragions(&c, &l).unwrap();
        for (p, q) in c.points().iter().zip(out.points()) {
            assert!(p.distance(q) <= 1e-12);
        }
        assert_eq!(out_lm, l);
        // Reversed labelling is also parallel: still identity.
        let flipped = lm([0.0, 0.0, 1.4], [0.02, -0.08, 1.6], [0.02, 0.08, 1.6]);
        let (out, _) = align_tragions(&c, &flipped).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn align_undoes_known_yaw() {
        let base = lm([-0.05, 0.0, 1.4], [0.0, 1.0, 1.6], [0.0, -1.0, 1.6]);
        let yaw = Yaw::new(30f64.to_radians(), Point3::new(0.0, 0.0, 0.0));
        let rotated = base.map(|p| yaw.apply(p));
        let c = pseudo_cloud(40, 2).map(|p| yaw.apply(p));
        let (out, out_lm) = align_tragions(&c, &rotated).unwrap();
        assert!(tragion_misalignment(&out_lm).abs() <= 1e-9);
        let d = out_lm.tragion_left - out_lm.tragion_right;
        assert!((d.x / d.y).atan().abs() <= 1e-9);
        assert_isometry(&c, &out);
        for (p, q) in c.points().iter().zip(out.points()) {
            assert_eq!(p.z, q.z);
        }
    }

    #[test]
    fn align_rejects_vertically_stacked_tragions() {
        let c = pseudo_cloud(5, 3);
        let l = lm([0.0, 0.0, 1.4], [0.1, 0.1, 1.7], [0.1, 0.1, 1.5]);
        assert_eq!(
            align_tragions(&c, &l).unwrap_err(),
            GeometryError::DegenerateTragions
        );
    }

    #[test]
    fn orient_forward_round_trip() {
        // Face mass forward (+x) of the tragion line.
        let pts: Vec<[f64; 3]> = (0..30)
            .map(|i| {
                let t = i as f64 / 30.0;
                [0.05 + 0.05 * t, 0.08 * (t - 0.5), 1.5 + 0.1 * t]
            })
            .collect();
        let c = cloud(&pts);
        let l = lm([-0.05, 0.0, 1.45], [0.0, 0.07, 1.6], [0.0, -0.07, 1.6]);
        let (same, same_lm) = orient_forward(&c, &l);
        assert_eq!(same, c);
        assert_eq!(same_lm, l);

        let turn = Yaw::new(PI, l.tragion_midpoint());
        let back = c.map(|p| turn.apply(p));
        let back_lm = l.map(|p| turn.apply(p));
        let (fixed, _) = orient_forward(&back, &back_lm);
        for (p, q) in c.points().iter().zip(fixed.points()) {
            assert!(p.distance(q) <= 1e-9);
        }
    }

    #[test]
    fn orient_forward_noop_without_points_above_cervicale() {
        let c = cloud(&[[-1.0, 0.0, 0.5], [-1.0, 0.1, 0.6]]);
        let l = lm([0.0, 0.0, 1.0], [0.0, 0.1, 1.2], [0.0, -0.1, 1.2]);
        let (out, _) = orient_forward(&c, &l);
        assert_eq!(out, c);
    }

    #[test]
    fn crop_boundaries() {
        let l = lm([0.0, 0.0, 1.4], [0.0, 0.07, 1.6], [0.0, -0.07, 1.6]);
        let c = cloud(&[
            [0.0, 0.0, 1.5],   // on the plane: excluded
            [0.05, 0.0, 1.37], // 3 cm below cervicale: kept
            [0.05, 0.0, 1.35], // 5 cm below: excluded
            [0.05, 0.0, 1.5],  // kept
            [-0.05, 0.0, 1.5], // behind: excluded
        ]);
        let out = crop_face(&c, &l, 0.04).unwrap();
        assert_eq!(out.points(), &[c.points()[1], c.points()[3]]);
        for (i, p) in c.points().iter().enumerate() {
            let kept = out.points().contains(p);
            let ok = p.x > 0.0 && p.z > 1.4 - 0.04;
            assert_eq!(kept, ok, "point {i}");
        }
    }

    #[test]
    fn crop_behind_plane_is_error() {
        let l = lm([0.0, 0.0, 1.4], [0.0, 0.07, 1.6], [0.0, -0.07, 1.6]);
        let c = cloud(&[[-0.1, 0.0, 1.5], [-0.01, 0.0, 1.6]]);
        assert_eq!(crop_face(&c, &l, 0.04), Err(GeometryError::EmptyCrop));
    }

    #[test]
    fn center_examples() {
        assert_eq!(center(&cloud(&[[3.0, 4.0, 5.0]])).points(), &[Point3::ORIGIN]);
        assert_eq!(
            center(&cloud(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])).points(),
            &[Point3::new(-1.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]
        );
        let c = center(&pseudo_cloud(100, 4));
        let cc = c.centroid();
        assert!(cc.x.abs() < 1e-9 && cc.y.abs() < 1e-9 && cc.z.abs() < 1e-9);
        let twice = center(&c);
        for (p, q) in c.points().iter().zip(twice.points()) {
            assert!(p.distance(q) <= 1e-12);
        }
    }

    #[test]
    fn resample_without_replacement_is_distinct() {
        let pts: Vec<Point3> = (0..30_000).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let c = PointCloud::new(pts).unwrap();
        let out = resample(&c, 10_000, 7).unwrap();
        assert_eq!(out.len(), 10_000);
        let mut xs: Vec<u64> = out.points().iter().map(|p| p.x as u64).collect();
        xs.sort_unstable();
        xs.dedup();
        assert_eq!(xs.len(), 10_000);
        assert_eq!(out, resample(&c, 10_000, 7).unwrap());
    }

    #[test]
    fn resample_equal_size_is_permutation() {
        let pts: Vec<Point3> = (0..257).map(|i| Point3::new(i as f64, 1.0, 2.0)).collect();
        let c = PointCloud::new(pts).unwrap();
        let out = resample(&c, 257, 11).unwrap();
        let mut xs: Vec<u64> = out.points().iter().map(|p| p.x as u64).collect();
        xs.sort_unstable();
        assert_eq!(xs, (0..257).collect::<Vec<u64>>());
    }

    #[test]
    fn resample_upsamples_with_replacement() {
        let c = cloud(&[[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let out = resample(&c, 9, 0).unwrap();
        assert_eq!(out.len(), 9);
        assert!(out.points().iter().all(|p| c.points().contains(p)));
        assert_eq!(resample(&c, 0, 0), Err(GeometryError::ZeroTarget));
    }

    #[test]
    fn nearest_distance_examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[3.0, 4.0, 0.0], [10.0, 0.0, 0.0]]);
        assert_eq!(nearest_distances(&a, &b), vec![5.0]);
        let c = pseudo_cloud(64, 5);
        assert!(nearest_distances(&c, &c).iter().all(|&d| d == 0.0));
        let rev = PointCloud::new(b.points().iter().rev().copied().collect()).unwrap();
        assert_eq!(nearest_distances(&a, &rev), nearest_distances(&a, &b));
    }
}
