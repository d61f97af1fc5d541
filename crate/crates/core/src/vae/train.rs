use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{emd_loss, mmd_loss, LatentBatch, EVAL_EPS_REL};
use super::model::tensor_to_cloud;
use super::{Vae, VaeConfig, VaeError};
use crate::geometry::PointCloud;
use crate::nn::{Adam, Tape, Tensor};

/// Seed offsets for the independent random streams of a training run.
const SPLIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const PRIOR_STREAM: u64 = 3;
const VAL_PRIOR_STREAM: u64 = 4;

/// Losses for one epoch. Epoch 0 is measured before any update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_lr: f64,
    pub train_ll: f64,
    pub val_lr: f64,
    pub val_ll: f64,
}

impl EpochLog {
    pub fn val_total(&self) -> f64 {
        self.val_lr + self.val_ll
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub const HEADER: &'static str = "epoch,train_Lr,train_Ll,val_Lr,val_Ll";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                e.epoch, e.train_lr, e.train_ll, e.val_lr, e.val_ll
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Vae<f32>,
    pub log: TrainingLog,
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Trains a fresh model; see [`train_with`].
pub fn train(dataset: &[PointCloud], cfg: &VaeConfig) -> Result<TrainOutcome, VaeError> {
    train_with(dataset, cfg, |_| {})
}

/// Minimizes `L = L_l + L_r` with Adam, one step per batch, evaluating the
/// held-out split after every epoch. Stops once the validation loss has not
/// improved for `max(patience, 1)` consecutive epochs or at `max_epochs`.
pub fn train_with(
    dataset: &[PointCloud],
    cfg: &VaeConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, VaeError> {
    cfg.validate()?;
    if dataset.len() < 2 * cfg.batch_size {
        return Err(VaeError::DatasetTooSmall(format!(
            "{} clouds, need at least {} for batch size {}",
            dataset.len(),
            2 * cfg.batch_size,
            cfg.batch_size
        )));
    }
    if let Some(c) = dataset.iter().find(|c| c.len() != cfg.n_points) {
        return Err(VaeError::PointCount {
            expected: cfg.n_points,
            got: c.len(),
        });
    }
    let (train_idx, val_idx) = split(dataset.len(), cfg);
    let mut model = Vae::<f32>::new(cfg)?;
    let mut opt = Adam::new(cfg.lr as f32);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(SHUFFLE_STREAM));
    let mut prior_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(PRIOR_STREAM));
    let mut val_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(VAL_PRIOR_STREAM));
    let val_q = prior_samples(&mut val_rng, val_idx.len(), cfg);

    let mut log = TrainingLog::default();
    let mut order = train_idx.clone();
    let (train_lr, train_ll) = run_epoch(&mut model, None, dataset, &order, &mut prior_rng, 0)?;
    let (val_lr, val_ll) = evaluate(&model, dataset, &val_idx, &val_q)?;
    let first = EpochLog { epoch: 0, train_lr, train_ll, val_lr, val_ll };
    on_epoch(&first);
    log.epochs.push(first);
    let mut best = (first.val_total(), 0, model.clone());
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (train_lr, train_ll) =
            run_epoch(&mut model, Some(&mut opt), dataset, &order, &mut prior_rng, epoch)?;
        let (val_lr, val_ll) = evaluate(&model, dataset, &val_idx, &val_q)?;
        let entry = EpochLog { epoch, train_lr, train_ll, val_lr, val_ll };
        on_epoch(&entry);
        log.epochs.push(entry);
        if entry.val_total() < best.0 {
            best = (entry.val_total(), epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience.max(1) {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best.2,
        log,
        best_epoch: best.1,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

/// Seeded split; the validation part holds `round(val_frac * n)` clouds,
/// at least 2 so its latent loss is defined.
fn split(n: usize, cfg: &VaeConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(SPLIT_STREAM)));
    let n_val = ((n as f64 * cfg.val_frac).round() as usize).clamp(2, n - cfg.batch_size);
    let train = idx.split_off(n_val);
    (train, idx)
}

fn prior_samples(rng: &mut ChaCha8Rng, m: usize, cfg: &VaeConfig) -> Vec<Vec<f64>> {
    let u = cfg.uniform_bound;
    (0..m)
        .map(|_| (0..cfg.latent_dim).map(|_| rng.random_range(-u..=u)).collect())
        .collect()
}

struct Forward {
    z: Vec<f64>,
    lr: f64,
}

/// One pass over `order` in batches. With an optimizer every batch takes a
/// step; without one the pass only measures. Returns batch-mean `L_r` and
/// `L_l` averaged over batches.
fn run_epoch(
    model: &mut Vae<f32>,
    mut opt: Option<&mut Adam<f32>>,
    data: &[PointCloud],
    order: &[usize],
    prior_rng: &mut ChaCha8Rng,
    epoch: usize,
) -> Result<(f64, f64), VaeError> {
    let cfg = model.config().clone();
    let mut batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
    if batches.last().is_some_and(|b| b.len() < 2) {
        batches.pop();
    }
    let (mut sum_lr, mut sum_ll) = (0.0, 0.0);
    for (bi, batch) in batches.iter().enumerate() {
        let q = prior_samples(prior_rng, batch.len(), &cfg);
        let (lr, ll, grads) = batch_step(model, data, batch, &q, opt.is_some())?;
        if !(lr.is_finite() && ll.is_finite()) {
            return Err(VaeError::NonFinite { epoch, batch: bi, lr, ll });
        }
        if let (Some(opt), Some(grads)) = (opt.as_deref_mut(), grads) {
            let refs: Vec<&[f32]> = grads.iter().map(Vec::as_slice).collect();
            let mut params: Vec<&mut Tensor<f32>> = model.params_mut().iter_mut().collect();
            opt.step(&mut params, &refs)?;
        }
        sum_lr += lr;
        sum_ll += ll;
    }
    let nb = batches.len().max(1) as f64;
    Ok((sum_lr / nb, sum_ll / nb))
}

type BatchResult = (f64, f64, Option<Vec<Vec<f32>>>);

/// Loss of one batch and, when requested, the parameter gradient of
/// `mean_b L_r + L_l`. Examples run in parallel; gradients are summed in
/// batch order so the result does not depend on the thread count.
fn batch_step(
    model: &Vae<f32>,
    data: &[PointCloud],
    batch: &[usize],
    q: &[Vec<f64>],
    want_grad: bool,
) -> Result<BatchResult, VaeError> {
    let eps_rel = model.config().train_eps_rel;
    let m = batch.len();
    let d = model.config().latent_dim;

    let latents: Vec<Vec<f64>> = batch
        .par_iter()
        .map(|&i| model.encode(&data[i]))
        .collect::<Result<_, _>>()?;
    let mmd = mmd_loss(&LatentBatch::from_rows(&latents, q)?)?;

    let per_example = |(b, &i): (usize, &usize)| -> Result<(Forward, Option<Vec<Vec<f32>>>), VaeError> {
        let x = model.cloud_tensor(&data[i])?;
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape);
        let xv = tape.input(x, false);
        let zv = model.encoder_on(&mut tape, &vars, xv, None)?;
        let rv = model.decoder_on(&mut tape, &vars, zv, None)?;
        let recon = tensor_to_cloud(tape.value(rv));
        let emd = emd_loss(&recon, &data[i], eps_rel)?;
        let z: Vec<f64> = tape.value(zv).data().iter().map(|&v| v as f64).collect();
        if !want_grad {
            return Ok((Forward { z, lr: emd.loss }, None));
        }
        let inv_m = 1.0 / m as f64;
        let g_recon: Vec<f32> = emd.grad.iter().map(|&g| (g * inv_m) as f32).collect();
        let g_z: Vec<f32> = mmd.grad[b * d..(b + 1) * d].iter().map(|&g| g as f32).collect();
        tape.backward(&[(rv, &g_recon), (zv, &g_z)])?;
        let grads = vars
            .iter()
            .zip(model.params())
            .map(|(&v, p)| tape.grad(v).map_or_else(|| vec![0.0; p.numel()], <[f32]>::to_vec))
            .collect();
        Ok((Forward { z, lr: emd.loss }, Some(grads)))
    };
    let results: Vec<_> = batch
        .par_iter()
        .enumerate()
        .map(per_example)
        .collect::<Result<_, _>>()?;

    let mut lr = 0.0;
    let mut total: Option<Vec<Vec<f32>>> = None;
    for (b, (fwd, grads)) in results.into_iter().enumerate() {
        debug_assert_eq!(fwd.z, latents[b]);
        lr += fwd.lr;
        if let Some(g) = grads {
            match total.as_mut() {
                None => total = Some(g),
                Some(t) => {
                    for (acc, gi) in t.iter_mut().zip(&g) {
                        for (a, v) in acc.iter_mut().zip(gi) {
                            *a += v;
                        }
                    }
                }
            }
        }
    }
    Ok((lr / m as f64, mmd.loss, total))
}

/// Held-out losses: mean `L_r` with the tight matching tolerance, and the
/// latent loss of the whole split against a fixed prior sample.
fn evaluate(
    model: &Vae<f32>,
    data: &[PointCloud],
    idx: &[usize],
    q: &[Vec<f64>],
) -> Result<(f64, f64), VaeError> {
    let out: Vec<(Vec<f64>, f64)> = idx
        .par_iter()
        .map(|&i| {
            let z = model.encode(&data[i])?;
            let recon = model.decode(&z)?;
            Ok((z, emd_loss(&recon, &data[i], EVAL_EPS_REL)?.loss))
        })
        .collect::<Result<_, VaeError>>()?;
    let lr = out.iter().map(|o| o.1).sum::<f64>() / idx.len() as f64;
    let z: Vec<Vec<f64>> = out.into_iter().map(|o| o.0).collect();
    let ll = mmd_loss(&LatentBatch::from_rows(&z, q)?)?.loss;
    Ok((lr, ll))
}

/// Mean tight-tolerance reconstruction loss of `model` over `clouds`.
pub fn reconstruction_loss(model: &Vae<f32>, clouds: &[PointCloud]) -> Result<f64, VaeError> {
    let losses: Vec<f64> = clouds
        .par_iter()
        .map(|c| {
            let recon = model.decode(&model.encode(c)?)?;
            Ok(emd_loss(&recon, c, EVAL_EPS_REL)?.loss)
        })
        .collect::<Result<_, VaeError>>()?;
    Ok(losses.iter().sum::<f64>() / clouds.len().max(1) as f64)
}
