use super::VaeError;
use crate::assignment::{auction_solve, point_cost, Assignment, AuctionParams};
use crate::geometry::PointCloud;
use crate::nn::Tensor;

/// Auction `eps_final` relative to the mean pair cost, used while training.
pub const TRAIN_EPS_REL: f64 = 1e-2;
/// Auction `eps_final` relative to the mean pair cost, used for evaluation.
pub const EVAL_EPS_REL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct EmdLoss {
    pub loss: f64,
    /// d loss / d recon, row-major `[n, 3]`, with the matching held fixed.
    pub grad: Vec<f64>,
    pub assignment: Assignment,
}

/// Matching loss `sum_i |r_i - t_sigma(i)|^2`, with `sigma` from the auction
/// run to `eps_rel * mean pair cost`.
pub fn emd_loss(recon: &PointCloud, target: &PointCloud, eps_rel: f64) -> Result<EmdLoss, VaeError> {
    let costs = point_cost(recon, target)?;
    let params = AuctionParams::relative(&costs, costs.mean_cost(), eps_rel);
    let assignment = auction_solve(&costs, &params)?;
    Ok(emd_loss_with_sigma(recon, target, assignment.sigma))
}

/// Loss and gradient for a fixed matching.
pub fn emd_loss_with_sigma(recon: &PointCloud, target: &PointCloud, sigma: Vec<usize>) -> EmdLoss {
    let r = recon.points();
    let t = target.points();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(r.len() * 3);
    for (i, &j) in sigma.iter().enumerate() {
        let d = r[i] - t[j];
        loss += d.norm_sq();
        grad.extend_from_slice(&[2.0 * d.x, 2.0 * d.y, 2.0 * d.z]);
    }
    EmdLoss {
        loss,
        grad,
        assignment: Assignment {
            sigma,
            total_cost: loss,
        },
    }
}

/// `exp(-|a - b|^2 / 2)`
pub fn gaussian_kernel(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-0.5 * d2).exp()
}

/// Encoder outputs for a batch and matching draws from the target prior.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub z: Tensor<f64>,
    pub q_samples: Tensor<f64>,
}

impl LatentBatch {
    pub fn new(z: Tensor<f64>, q_samples: Tensor<f64>) -> Result<Self, VaeError> {
        if z.rank() != 2 || z.shape() != q_samples.shape() {
            return Err(VaeError::Config(format!(
                "latent batch shapes {:?} vs {:?}",
                z.shape(),
                q_samples.shape()
            )));
        }
        Ok(Self { z, q_samples })
    }

    pub fn from_rows(z: &[Vec<f64>], q: &[Vec<f64>]) -> Result<Self, VaeError> {
        let d = z.first().map_or(0, Vec::len);
        let zt = Tensor::new(vec![z.len(), d], z.concat())?;
        let qt = Tensor::new(vec![q.len(), d], q.concat())?;
        Self::new(zt, qt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmdLoss {
    pub loss: f64,
    /// d loss / d z, row-major `[m, d]`.
    pub grad: Vec<f64>,
}

/// Biased (V-statistic) MMD estimate with a unit-bandwidth Gaussian kernel:
/// `mean k(z, z') - 2 mean k(z, q) + mean k(q, q')`, diagonals included.
pub fn mmd_loss(batch: &LatentBatch) -> Result<MmdLoss, VaeError> {
    let (m, d) = (batch.z.shape()[0], batch.z.shape()[1]);
    if m < 2 {
        return Err(VaeError::BatchTooSmall(m));
    }
    let z: Vec<&[f64]> = batch.z.data().chunks_exact(d.max(1)).take(m).collect();
    let q: Vec<&[f64]> = batch.q_samples.data().chunks_exact(d.max(1)).take(m).collect();
    let mut grad = vec![0.0; m * d];
    let mut zz = 0.0;
    let mut zq = 0.0;
    let mut qq = 0.0;
    for a in 0..m {
        let g = &mut grad[a * d..(a + 1) * d];
        for j in 0..m {
            let k = gaussian_kernel(z[a], z[j]);
            zz += k;
            for c in 0..d {
                g[c] -= k * (z[a][c] - z[j][c]);
            }
        }
        for j in 0..m {
            let k = gaussian_kernel(z[a], q[j]);
            zq += k;
            for c in 0..d {
                g[c] += k * (z[a][c] - q[j][c]);
            }
        }
    }
    for a in 0..m {
        for j in 0..m {
            qq += gaussian_kernel(q[a], q[j]);
        }
    }
    let inv = 1.0 / (m as f64 * m as f64);
    for g in &mut grad {
        *g *= 2.0 * inv;
    }
    Ok(MmdLoss {
        loss: (zz - 2.0 * zq + qq) * inv,
        grad,
    })
}
