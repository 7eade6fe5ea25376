//! Reverse-mode gradients through the unfolded network and the trainer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::conv::{conv3x3, conv3x3_adjoint_acc, conv3x3_kernel_grad_acc, TAPS};
use super::forward::{blocks_to_padded, mask_padding, padded_to_blocks, run, Correction, Tape};
use super::model::UnfoldedModel;
use crate::blocks::{partition_slice, BlockGrid};
use crate::error::{Error, Result};
use crate::map::ParametricMap;
use crate::sampling::{block_side, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-4,
            epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be finite and >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model: UnfoldedModel,
    pub losses: Vec<LossRecord>,
}

impl TrainReport {
    /// Mean loss of each epoch.
    pub fn epoch_means(&self) -> Vec<f64> {
        let epochs = self.losses.last().map_or(0, |l| l.epoch + 1);
        let mut sums = vec![(0.0, 0usize); epochs];
        for l in &self.losses {
            sums[l.epoch].0 += l.loss;
            sums[l.epoch].1 += 1;
        }
        sums.into_iter().map(|(s, n)| s / n as f64).collect()
    }
}

/// CSV with header `epoch,step,loss`.
pub fn loss_curve_csv(losses: &[LossRecord]) -> String {
    let mut out = String::from("epoch,step,loss\n");
    for l in losses {
        out.push_str(&format!("{},{},{:?}\n", l.epoch, l.step, l.loss));
    }
    out
}

/// First-moment/second-moment adaptive step (beta1 0.9, beta2 0.999).
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

fn check_dataset(model: &UnfoldedModel, data: &[ParametricMap]) -> Result<BlockGrid> {
    let first = data.first().ok_or(Error::EmptyInput)?;
    if data.iter().any(|m| m.shape() != first.shape()) {
        return Err(Error::DimensionMismatch("training maps must share dimensions".into()));
    }
    BlockGrid::new(first.rows(), first.cols(), block_side(model.a.n())?)
}

/// Mean squared error of the reconstruction of `truth` and the gradient of
/// `weight * mse` with respect to the trainable parameters.
pub(crate) fn sample_loss_grad(
    model: &UnfoldedModel,
    truth: &ParametricMap,
    grid: &BlockGrid,
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let a = &model.a;
    let (m, n, bs) = (a.m(), a.n(), model.block_size);
    let layout = model.layout();
    let mut grad = vec![0.0; layout.len()];
    let truth_blocks = partition_slice(truth.data(), grid);
    let y: Vec<Vec<f64>> = truth_blocks.iter().map(|b| a.forward(b)).collect();

    let mut tape = Tape::default();
    let out = run(model, &y, grid, Correction::Learned, Some(&mut tape), false)?;

    let pixels = (grid.source_rows * grid.source_cols) as f64;
    let mut sq = 0.0;
    let mut g: Vec<Vec<f64>> = out
        .iter()
        .zip(&truth_blocks)
        .map(|(o, t)| {
            o.iter()
                .zip(t)
                .map(|(p, q)| {
                    let d = p - q;
                    sq += d * d;
                    2.0 * weight * d / pixels
                })
                .collect()
        })
        .collect();
    mask_padding(&mut g, grid);
    let loss = sq / pixels;

    let mut gy: Vec<Vec<f64>> = vec![vec![0.0; m]; y.len()];
    let train_a = model.trainable_a;
    // d/dA_ij accumulated as rank-one updates u_i v_j
    let ga = |u: &[f64], v: &[f64], grad: &mut [f64]| {
        if !train_a {
            return;
        }
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (gij, &vj) in grad[i * n..(i + 1) * n].iter_mut().zip(v) {
                *gij += ui * vj;
            }
        }
    };

    let c = model.channels();
    for (k, it) in tape.iters.iter().enumerate().rev() {
        // padded cells of x^k are constant zero
        mask_padding(&mut g, grid);
        if let (Some(d), Some(img)) = (&model.deblock, &it.deblock_in) {
            let p = &d[k];
            let (rows, cols) = (grid.padded_rows(), grid.padded_cols());
            let g_img = blocks_to_padded(&g, grid);
            let corr = conv3x3(img, rows, cols, &p.kernel);
            grad[layout.deblock_gain(k)] += g_img.iter().zip(&corr).map(|(a, b)| a * b).sum::<f64>();
            let mut gk = [0.0; TAPS];
            conv3x3_kernel_grad_acc(img, &g_img, rows, cols, &mut gk);
            let off = layout.deblock_kernel(k);
            for (dst, v) in grad[off..off + TAPS].iter_mut().zip(gk) {
                *dst += p.gain * v;
            }
            let mut g_in = g_img.clone();
            let mut adj = vec![0.0; rows * cols];
            conv3x3_adjoint_acc(&g_img, rows, cols, &p.kernel, &mut adj);
            for (gi, v) in g_in.iter_mut().zip(adj) {
                *gi += p.gain * v;
            }
            padded_to_blocks(&g_in, grid, &mut g);
        }

        let theta = &model.theta[k];
        let (c1, c2) = (layout.conv1(k), layout.conv2(k));
        for b in 0..g.len() {
            let gx_next = &g[b];
            let gw = a.forward(gx_next);
            // x^k = A^T w + x + r, w = y - A x - A r
            ga(
                &gw,
                &it.x_prev[b]
                    .iter()
                    .zip(&it.r[b])
                    .map(|(p, q)| -(p + q))
                    .collect::<Vec<_>>(),
                &mut grad,
            );
            ga(&it.w[b], gx_next, &mut grad);
            for (gyi, gwi) in gy[b].iter_mut().zip(&gw) {
                *gyi += gwi;
            }
            let at_gw = a.adjoint(&gw);
            // shared gradient of x^{k-1} and r
            let v: Vec<f64> = gx_next.iter().zip(&at_gw).map(|(p, q)| p - q).collect();

            // back through r = conv2(relu(conv1(X)))
            let x_prev = &it.x_prev[b];
            let hidden = &it.hidden[b];
            let mut gx = v.clone();
            let mut act = vec![0.0; n];
            let mut gh = vec![0.0; n];
            for ch in 0..c {
                let h = &hidden[ch * n..(ch + 1) * n];
                for (a_, &hv) in act.iter_mut().zip(h) {
                    *a_ = hv.max(0.0);
                }
                conv3x3_kernel_grad_acc(&act, &v, bs, bs, &mut grad[c2 + ch * TAPS..c2 + (ch + 1) * TAPS]);
                gh.iter_mut().for_each(|x| *x = 0.0);
                conv3x3_adjoint_acc(&v, bs, bs, &theta.conv2[ch * TAPS..(ch + 1) * TAPS], &mut gh);
                for (ghv, &hv) in gh.iter_mut().zip(h) {
                    if hv <= 0.0 {
                        *ghv = 0.0;
                    }
                }
                conv3x3_kernel_grad_acc(x_prev, &gh, bs, bs, &mut grad[c1 + ch * TAPS..c1 + (ch + 1) * TAPS]);
                conv3x3_adjoint_acc(&gh, bs, bs, &theta.conv1[ch * TAPS..(ch + 1) * TAPS], &mut gx);
            }
            g[b] = gx;
        }
    }

    // x^0 = mask(A^T y)
    mask_padding(&mut g, grid);
    for b in 0..g.len() {
        ga(&y[b], &g[b], &mut grad);
        let ag = a.forward(&g[b]);
        for (gyi, v) in gy[b].iter_mut().zip(ag) {
            *gyi += v;
        }
        // y = A x_true
        ga(&gy[b], &truth_blocks[b], &mut grad);
    }
    Ok((loss, grad))
}

/// Mean MSE over `batch` and its gradient with respect to the trainable
/// parameters. Per-sample work runs in parallel; the reduction is in batch
/// order, so results are bit-reproducible.
pub fn loss_and_gradient(model: &UnfoldedModel, batch: &[&ParametricMap]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let owned: Vec<ParametricMap> = batch.iter().map(|m| (*m).clone()).collect();
    let grid = check_dataset(model, &owned)?;
    let weight = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|t| sample_loss_grad(model, t, &grid, weight))
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; model.layout().len()];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l * weight;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    Ok((loss, grad))
}

/// Mean MSE over `batch` without gradients.
pub fn batch_loss(model: &UnfoldedModel, batch: &[&ParametricMap]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for t in batch {
        let rec = super::forward::reconstruct(t, model)?;
        let mse = rec
            .data()
            .iter()
            .zip(t.data())
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            / t.len() as f64;
        total += mse;
    }
    Ok(total / batch.len() as f64)
}

/// Trains all trainable parameters on noiseless block measurements of the
/// ground-truth maps in `data`.
pub fn train_model(model: &UnfoldedModel, data: &[ParametricMap], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    check_dataset(model, data)?;
    let mut model = model.clone();
    let mut params = model.trainable_params();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut losses = Vec::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&ParametricMap> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = match loss_and_gradient(&model, &batch) {
                Ok(v) => v,
                Err(Error::Divergence(_)) => return Err(Error::NonFiniteLoss { epoch, step }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            adam.step(&mut params, &grad);
            model.set_trainable_params(&params)?;
            losses.push(LossRecord { epoch, step, loss });
            step += 1;
        }
    }
    Ok(TrainReport { model, losses })
}

/// Largest relative disagreement between `analytic` and central differences
/// of `loss` around `params`. The denominator is
/// `max(|analytic|, |numeric|, 1e-6)`.
pub fn finite_difference_check(params: &[f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> f64, eps: f64) -> f64 {
    assert!(eps > 0.0, "eps must be > 0");
    assert_eq!(params.len(), analytic.len());
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + eps;
        let lp = loss(&p);
        p[i] = orig - eps;
        let lm = loss(&p);
        p[i] = orig;
        let numeric = (lp - lm) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

/// Compares the hand-derived gradient of the single-sample loss with central
/// differences over every trainable parameter (a frozen `A` is excluded).
pub fn gradient_check(model: &UnfoldedModel, sample: &ParametricMap, eps: f64) -> Result<f64> {
    let (_, analytic) = loss_and_gradient(model, &[sample])?;
    let params = model.trainable_params();
    let mut probe = model.clone();
    let mut failure = None;
    let worst = finite_difference_check(
        &params,
        &analytic,
        |p| {
            probe.set_trainable_params(p).expect("same layout");
            match batch_loss(&probe, &[sample]) {
                Ok(l) => l,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        eps,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(worst),
    }
}
