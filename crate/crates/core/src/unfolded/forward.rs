//! The unfolded iteration
//!
//! ```text
//! x^0 = A^T y
//! z^{k-1} = y - A x^{k-1}
//! x^k = A^T z^{k-1} + x^{k-1} - (A^T A - I) vec(N_k(X^{k-1}))
//! ```
//!
//! applied per block, followed after every iteration by reassembly, the
//! optional full-image deblocker and re-partitioning.

use rayon::prelude::*;

use super::conv::conv3x3_acc;
use super::model::{DeblockParams, UnfoldedModel};
use crate::blocks::{partition_slice, reassemble_slices, BlockGrid};
use crate::error::{Error, Result};
use crate::map::ParametricMap;
use crate::sampling::{block_side, LinearOperator};

/// Values recorded during a forward pass for the backward pass.
#[derive(Debug, Default)]
pub(crate) struct Tape {
    pub iters: Vec<IterTape>,
}

#[derive(Debug)]
pub(crate) struct IterTape {
    /// `x^{k-1}` per block.
    pub x_prev: Vec<Vec<f64>>,
    /// `r = vec(N_k(X^{k-1}))` per block.
    pub r: Vec<Vec<f64>>,
    /// `z^{k-1} - A r` per block.
    pub w: Vec<Vec<f64>>,
    /// First-layer pre-activations per block.
    pub hidden: Vec<Vec<f64>>,
    /// Padded full image entering the deblocker.
    pub deblock_in: Option<Vec<f64>>,
}

/// Zeroes the cells of every block that fall outside the source image.
pub(crate) fn mask_padding(blocks: &mut [Vec<f64>], grid: &BlockGrid) {
    if grid.pad_rows == 0 && grid.pad_cols == 0 {
        return;
    }
    for (b, block) in blocks.iter_mut().enumerate() {
        for (p, v) in block.iter_mut().enumerate() {
            if !grid.in_source(b, p) {
                *v = 0.0;
            }
        }
    }
}

pub(crate) fn blocks_to_padded(blocks: &[Vec<f64>], grid: &BlockGrid) -> Vec<f64> {
    let mut img = vec![0.0; grid.padded_rows() * grid.padded_cols()];
    for (b, block) in blocks.iter().enumerate() {
        for (p, &v) in block.iter().enumerate() {
            img[grid.padded_index(b, p)] = v;
        }
    }
    img
}

pub(crate) fn padded_to_blocks(img: &[f64], grid: &BlockGrid, blocks: &mut [Vec<f64>]) {
    for (b, block) in blocks.iter_mut().enumerate() {
        for (p, v) in block.iter_mut().enumerate() {
            *v = if grid.in_source(b, p) {
                img[grid.padded_index(b, p)]
            } else {
                0.0
            };
        }
    }
}

/// `x + gain * (kernel * x)` on a full image with zero borders.
pub fn deblock(map: &ParametricMap, params: &DeblockParams) -> Result<ParametricMap> {
    let (rows, cols) = map.shape();
    let mut corr = vec![0.0; rows * cols];
    conv3x3_acc(map.data(), rows, cols, &params.kernel, &mut corr);
    let data = map.data().iter().zip(&corr).map(|(x, c)| x + params.gain * c).collect();
    ParametricMap::new(rows, cols, data, map.unit())
}

fn deblock_padded(img: &[f64], grid: &BlockGrid, params: &DeblockParams) -> Vec<f64> {
    let (rows, cols) = (grid.padded_rows(), grid.padded_cols());
    let mut corr = vec![0.0; rows * cols];
    conv3x3_acc(img, rows, cols, &params.kernel, &mut corr);
    img.iter().zip(&corr).map(|(x, c)| x + params.gain * c).collect()
}

/// One block update given the correction term `r`; returns `(x^k, w)` with
/// `w = z^{k-1} - A r`.
fn block_step<A: LinearOperator + ?Sized>(a: &A, y: &[f64], x: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let ax = a.forward(x);
    let ar = a.forward(r);
    let w: Vec<f64> = y.iter().zip(&ax).zip(&ar).map(|((yi, p), q)| yi - p - q).collect();
    let mut next = a.adjoint(&w);
    for ((o, xi), ri) in next.iter_mut().zip(x).zip(r) {
        *o += xi + ri;
    }
    (next, w)
}

/// `(k, block, x^{k-1}) -> r`.
pub type CorrectionFn<'a> = dyn Fn(usize, usize, &[f64]) -> Vec<f64> + Sync + 'a;

/// Correction source for each iteration: the learned denoisers, or an
/// arbitrary function `(k, block, x^{k-1}) -> r` for instrumentation.
pub(crate) enum Correction<'a> {
    Learned,
    Custom(&'a CorrectionFn<'a>),
}

pub(crate) fn run(
    model: &UnfoldedModel,
    y_blocks: &[Vec<f64>],
    grid: &BlockGrid,
    correction: Correction<'_>,
    mut tape: Option<&mut Tape>,
    parallel: bool,
) -> Result<Vec<Vec<f64>>> {
    let a = &model.a;
    let bs = model.block_size;
    if grid.block_size != bs {
        return Err(Error::DimensionMismatch(format!(
            "grid block size {} vs model {bs}",
            grid.block_size
        )));
    }
    if y_blocks.len() != grid.n_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurement blocks for a grid of {}",
            y_blocks.len(),
            grid.n_blocks()
        )));
    }
    if y_blocks.iter().any(|y| y.len() != a.m()) {
        return Err(Error::DimensionMismatch(format!(
            "measurement blocks must have length {}",
            a.m()
        )));
    }

    let mut x: Vec<Vec<f64>> = y_blocks.iter().map(|y| a.adjoint(y)).collect();
    mask_padding(&mut x, grid);

    for k in 0..model.iterations() {
        let step = |(b, (xb, yb)): (usize, (&Vec<f64>, &Vec<f64>))| {
            let (r, hidden) = match &correction {
                Correction::Learned => model.theta[k].apply_with_hidden(xb, bs, bs),
                Correction::Custom(f) => (f(k, b, xb), Vec::new()),
            };
            let (next, w) = block_step(a, yb, xb, &r);
            (next, w, r, hidden)
        };
        let results: Vec<_> = if parallel && tape.is_none() {
            x.par_iter().zip(y_blocks.par_iter()).enumerate().map(step).collect()
        } else {
            x.iter().zip(y_blocks.iter()).enumerate().map(step).collect()
        };
        let mut next = Vec::with_capacity(results.len());
        let mut it = IterTape {
            x_prev: Vec::new(),
            r: Vec::new(),
            w: Vec::new(),
            hidden: Vec::new(),
            deblock_in: None,
        };
        for (nx, w, r, h) in results {
            next.push(nx);
            if tape.is_some() {
                it.w.push(w);
                it.r.push(r);
                it.hidden.push(h);
            }
        }
        mask_padding(&mut next, grid);
        if let Some(d) = &model.deblock {
            let img = blocks_to_padded(&next, grid);
            let out = deblock_padded(&img, grid, &d[k]);
            padded_to_blocks(&out, grid, &mut next);
            if tape.is_some() {
                it.deblock_in = Some(img);
            }
        }
        if next.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(k + 1));
        }
        let prev = std::mem::replace(&mut x, next);
        if let Some(t) = tape.as_deref_mut() {
            it.x_prev = prev;
            t.iters.push(it);
        }
    }
    Ok(x)
}

/// Reconstructs a map from per-block measurements.
pub fn unfolded_forward(
    y_blocks: &[Vec<f64>],
    grid: &BlockGrid,
    model: &UnfoldedModel,
    unit: &str,
) -> Result<ParametricMap> {
    let x = run(model, y_blocks, grid, Correction::Learned, None, true)?;
    ParametricMap::new(grid.source_rows, grid.source_cols, reassemble_slices(&x, grid), unit)
}

/// Same iteration with the learned correction replaced by `f(k, block, x^{k-1})`.
/// Used to check the update algebra (e.g. with the oracle `x - x^{k-1}`).
pub fn forward_with_correction(
    y_blocks: &[Vec<f64>],
    grid: &BlockGrid,
    model: &UnfoldedModel,
    f: &CorrectionFn<'_>,
) -> Result<Vec<Vec<f64>>> {
    run(model, y_blocks, grid, Correction::Custom(f), None, false)
}

/// Samples `map` block-wise with the model's matrix.
pub fn sample_blocks(map: &ParametricMap, model: &UnfoldedModel) -> Result<(Vec<Vec<f64>>, BlockGrid)> {
    let side = block_side(model.a.n())?;
    let grid = BlockGrid::new(map.rows(), map.cols(), side)?;
    let y = partition_slice(map.data(), &grid)
        .iter()
        .map(|b| model.a.forward(b))
        .collect();
    Ok((y, grid))
}

/// Samples and reconstructs `map` (noiseless measurements).
pub fn reconstruct(map: &ParametricMap, model: &UnfoldedModel) -> Result<ParametricMap> {
    let (y, grid) = sample_blocks(map, model)?;
    unfolded_forward(&y, &grid, model, map.unit())
}
