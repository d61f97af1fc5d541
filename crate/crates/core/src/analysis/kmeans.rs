use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sq_dist, AnalysisError};

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step, one list per restart.
    pub traces: Vec<Vec<f64>>,
}

/// Index of the nearest centroid; ties go to the lowest index.
pub(crate) fn nearest_centroid(z: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cent) in centroids.iter().enumerate() {
        let d = sq_dist(z, cent);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, the rest drawn with probability
/// proportional to squared distance from the nearest chosen centre.
fn seed_centroids(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].clone();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (ClusterResult, Vec<f64>) {
    let k = centroids.len();
    let d = rows[0].len();
    let mut labels = vec![usize::MAX; rows.len()];
    let mut trace = Vec::new();
    let mut inertia = 0.0;
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        let mut changed = false;
        inertia = 0.0;
        let mut dists = vec![0.0; rows.len()];
        for (i, r) in rows.iter().enumerate() {
            let (c, dist) = nearest_centroid(r, &centroids);
            changed |= labels[i] != c;
            labels[i] = c;
            dists[i] = dist;
            inertia += dist;
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed at the point farthest from its own centroid.
                let far = (0..rows.len())
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap();
                centroids[c] = rows[far].clone();
                dists[far] = 0.0;
            }
        }
    }
    (
        ClusterResult {
            centroids,
            labels,
            inertia,
            iterations,
            traces: Vec::new(),
        },
        trace,
    )
}

/// Lloyd's algorithm from k-means++ seeds, keeping the lowest-inertia run of
/// `restarts`. Iterations stop once the assignment is unchanged or after
/// [`KMEANS_MAX_ITER`].
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<ClusterResult, AnalysisError> {
    if k == 0 || rows.len() < k {
        return Err(AnalysisError::TooFewRows { rows: rows.len(), k });
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(AnalysisError::Ragged {
            id: String::new(),
            expected: d,
            got: r.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterResult> = None;
    let mut traces = Vec::new();
    for _ in 0..restarts.max(1) {
        let seeds = seed_centroids(rows, k, &mut rng);
        let (run, trace) = lloyd(rows, seeds);
        traces.push(trace);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.unwrap();
    best.traces = traces;
    Ok(best)
}
