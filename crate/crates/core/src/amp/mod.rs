//! Approximate message passing.
//!
//! Starting from `x^0 = 0` each iteration forms the residual
//! `z^{k-1} = y - A x^{k-1}` and the next estimate
//! `x^k = T_k(A^T z^{k-1} + x^{k-1})`. With `onsager` enabled the residual
//! carries the correction `(1/M) z^{k-1} div(T_k)`, the divergence being
//! estimated with a single Gaussian probe.

pub mod cauchy;
pub mod denoise;
pub mod haar;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::blocks::{reassemble_slices, BlockGrid};
use crate::error::{Error, Result};
use crate::map::ParametricMap;
use crate::sampling::{block_side, CsProblem, LinearOperator, Measurements, SamplingOperator};

pub use cauchy::{cauchy_map_denoise, cauchy_map_scalar, map_objective};
pub use denoise::{soft, soft_threshold_denoise, DenoiserSpec, Threshold};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpOptions {
    pub onsager: bool,
    /// Stop once `||z||_2 / ||y||_2 < tol`.
    pub tol: f64,
    /// Seed of the divergence probe.
    pub seed: u64,
    /// Keep every iterate `x^k` in the output.
    pub record_iterates: bool,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self {
            onsager: false,
            tol: 1e-6,
            seed: 0,
            record_iterates: false,
        }
    }
}

/// Per-iteration solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub sigma_hat: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpOutput {
    pub state: AmpState,
    /// `||z^k||_2` after each iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// `x^1, x^2, ...` when requested.
    pub iterates: Vec<Vec<f64>>,
}

/// `||z||_2 / sqrt(M)`.
pub fn estimate_noise_std(z: &[f64], m: usize) -> f64 {
    assert!(m >= 1, "M must be >= 1");
    norm(z) / (m as f64).sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs AMP on one signal of shape `shape` (the denoiser sees it as an image).
pub fn amp_reconstruct(
    op: &dyn LinearOperator,
    y: &[f64],
    shape: (usize, usize),
    denoiser: &DenoiserSpec,
    max_iters: usize,
    options: &AmpOptions,
) -> Result<AmpOutput> {
    let (m, n) = (op.rows(), op.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "operator has {m} rows, y has {}",
            y.len()
        )));
    }
    if shape.0 * shape.1 != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} shape for signal of length {n}",
            shape.0, shape.1
        )));
    }
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
    }
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    denoiser.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let y_norm = norm(y);
    let mut x = vec![0.0; n];
    let mut z = y.to_vec();
    let mut trace = Vec::with_capacity(max_iters);
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut sigma_hat = estimate_noise_std(&z, m);
    let mut k = 0;

    while k < max_iters {
        k += 1;
        sigma_hat = estimate_noise_std(&z, m);
        let at_z = op.adjoint(&z);
        let pseudo: Vec<f64> = x.iter().zip(&at_z).map(|(a, b)| a + b).collect();
        let next = denoiser.apply(&pseudo, shape, sigma_hat)?;

        let mut resid: Vec<f64> = op.forward(&next).iter().zip(y).map(|(ax, yi)| yi - ax).collect();
        if options.onsager {
            let div = divergence_probe(denoiser, &pseudo, &next, shape, sigma_hat, &mut rng)?;
            let c = div / m as f64;
            for (r, zi) in resid.iter_mut().zip(&z) {
                *r += c * zi;
            }
        }
        if next.iter().chain(&resid).any(|v| !v.is_finite()) {
            return Err(Error::Divergence(k));
        }
        x = next;
        z = resid;
        let z_norm = norm(&z);
        trace.push(z_norm);
        if options.record_iterates {
            iterates.push(x.clone());
        }
        if z_norm == 0.0 || (y_norm > 0.0 && z_norm / y_norm < options.tol) {
            converged = true;
            break;
        }
    }
    Ok(AmpOutput {
        state: AmpState { x, z, sigma_hat, k },
        trace,
        converged,
        iterates,
    })
}

/// `<T(u + eps g) - T(u), g> / eps` with `g ~ N(0, I)` and `eps = 1e-4 ||u||_inf`.
fn divergence_probe(
    denoiser: &DenoiserSpec,
    u: &[f64],
    tu: &[f64],
    shape: (usize, usize),
    sigma_hat: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let scale = u.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let eps = if scale > 0.0 { 1e-4 * scale } else { 1e-4 };
    let g: Vec<f64> = (0..u.len()).map(|_| StandardNormal.sample(rng)).collect();
    let probe: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a + eps * b).collect();
    let tp = denoiser.apply(&probe, shape, sigma_hat)?;
    Ok(tp.iter().zip(tu).zip(&g).map(|((p, q), gi)| (p - q) * gi).sum::<f64>() / eps)
}

/// Result of reconstructing a whole map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapReconstruction {
    pub map: ParametricMap,
    /// One residual trace per block (a single trace for mask sampling).
    pub traces: Vec<Vec<f64>>,
}

/// Reconstructs the full map described by `problem`.
///
/// Matrix sampling runs one AMP instance per block; with `parallel` the blocks
/// are solved concurrently. Each block draws its probe seed from
/// `options.seed + block index`, so the output does not depend on scheduling.
pub fn reconstruct_map(
    problem: &CsProblem,
    denoiser: &DenoiserSpec,
    max_iters: usize,
    options: &AmpOptions,
    parallel: bool,
    unit: &str,
) -> Result<MapReconstruction> {
    match (&problem.operator, &problem.measurements) {
        (SamplingOperator::Matrix(a), Measurements::Blocks { grid, y }) => {
            let side = block_side(a.n())?;
            if side != grid.block_size {
                return Err(Error::DimensionMismatch(
                    "matrix width does not match block grid".into(),
                ));
            }
            let solve = |(b, yb): (usize, &Vec<f64>)| {
                let opts = AmpOptions {
                    seed: options.seed.wrapping_add(b as u64),
                    ..*options
                };
                amp_reconstruct(a, yb, (side, side), denoiser, max_iters, &opts)
            };
            let outs: Vec<AmpOutput> = if parallel {
                y.par_iter().enumerate().map(solve).collect::<Result<_>>()?
            } else {
                y.iter().enumerate().map(solve).collect::<Result<_>>()?
            };
            assemble(grid, outs, unit)
        }
        (SamplingOperator::Mask(mask), Measurements::Mask { rows, cols, y }) => {
            let sel = mask.row_selection();
            let out = amp_reconstruct(&sel, y, (*rows, *cols), denoiser, max_iters, options)?;
            Ok(MapReconstruction {
                map: ParametricMap::new(*rows, *cols, out.state.x, unit)?,
                traces: vec![out.trace],
            })
        }
        _ => Err(Error::DimensionMismatch("operator and measurement kinds differ".into())),
    }
}

fn assemble(grid: &BlockGrid, outs: Vec<AmpOutput>, unit: &str) -> Result<MapReconstruction> {
    let blocks: Vec<&[f64]> = outs.iter().map(|o| o.state.x.as_slice()).collect();
    let data = reassemble_slices(&blocks, grid);
    Ok(MapReconstruction {
        map: ParametricMap::new(grid.source_rows, grid.source_cols, data, unit)?,
        traces: outs.into_iter().map(|o| o.trace).collect(),
    })
}

/// CSV with header `iteration,residual_norm`, iterations counted from 1.
pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,residual_norm\n");
    for (i, r) in trace.iter().enumerate() {
        out.push_str(&format!("{},{r:?}\n", i + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian_matrix, orthonormal_gaussian_matrix, MeasurementMatrix};

    #[test]
    fn noise_std_examples() {
        assert_eq!(estimate_noise_std(&[0.0, 0.0], 2), 0.0);
        assert!((estimate_noise_std(&[3.0, 4.0], 2) - 5.0 / 2f64.sqrt()).abs() < 1e-15);
        let z = [1.0, -2.0, 0.5];
        let s = estimate_noise_std(&z, 3);
        let zc: Vec<f64> = z.iter().map(|v| -2.5 * v).collect();
        assert!((estimate_noise_std(&zc, 3) - 2.5 * s).abs() < 1e-14);
    }

    #[test]
    fn identity_operator_first_iterate_is_y() {
        let a = MeasurementMatrix::row_identity(16, 16).unwrap();
        let y: Vec<f64> = (0..16).map(|i| i as f64 - 3.0).collect();
        let den = DenoiserSpec::Soft {
            threshold: Threshold::Fixed(0.0),
        };
        let opts = AmpOptions {
            record_iterates: true,
            ..Default::default()
        };
        let out = amp_reconstruct(&a, &y, (4, 4), &den, 5, &opts).unwrap();
        assert_eq!(out.iterates[0], y);
        assert!(out.converged);
    }

    #[test]
    fn oracle_denoiser_reaches_fixed_point_in_one_step() {
        let a = gaussian_matrix(10, 25, 3).unwrap();
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.9).cos()).collect();
        let y = a.forward(&x);
        let out = amp_reconstruct(
            &a,
            &y,
            (5, 5),
            &DenoiserSpec::Oracle(x.clone()),
            10,
            &AmpOptions::default(),
        )
        .unwrap();
        assert_eq!(out.state.k, 1);
        assert_eq!(out.state.x, x);
        assert!(out.trace[0] < 1e-12);
    }

    #[test]
    fn orthonormal_square_converges_to_adjoint() {
        let a = orthonormal_gaussian_matrix(16, 16, 1).unwrap();
        let y: Vec<f64> = (0..16).map(|i| (i as f64).sqrt()).collect();
        let den = DenoiserSpec::Soft {
            threshold: Threshold::Fixed(0.0),
        };
        let out = amp_reconstruct(&a, &y, (4, 4), &den, 20, &AmpOptions::default()).unwrap();
        assert_eq!(out.state.k, 1);
        for (p, q) in out.state.x.iter().zip(a.adjoint(&y)) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_trace_non_increasing_when_well_posed() {
        let a = orthonormal_gaussian_matrix(16, 16, 2).unwrap();
        let y: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64).collect();
        let den = DenoiserSpec::SoftWavelet {
            threshold: Threshold::Scaled(0.5),
            levels: 2,
        };
        let opts = AmpOptions {
            tol: 0.0,
            ..Default::default()
        };
        let out = amp_reconstruct(&a, &y, (4, 4), &den, 30, &opts).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", out.trace);
        }
    }

    #[test]
    fn sparse_recovery_example() {
        let a = gaussian_matrix(32, 64, 0).unwrap();
        let mut x = vec![0.0; 64];
        x[10] = 1.0;
        let y = a.forward(&x);
        let den = DenoiserSpec::Soft {
            threshold: Threshold::Scaled(1.0),
        };
        let opts = AmpOptions {
            onsager: true,
            ..Default::default()
        };
        let out = amp_reconstruct(&a, &y, (8, 8), &den, 100, &opts).unwrap();
        let err = out
            .state
            .x
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "err {err} after {} iterations", out.state.k);
    }

    #[test]
    fn divergence_is_reported() {
        // unit-step Landweber on an operator with norm > sqrt(2) blows up
        let mut e = vec![0.0; 4];
        e[0] = 1e3;
        e[3] = 1e3;
        let a = MeasurementMatrix::from_entries(2, 2, e, 0).unwrap();
        let err = amp_reconstruct(
            &a,
            &[1.0, 1.0],
            (1, 2),
            &DenoiserSpec::Identity,
            500,
            &AmpOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence(k) if k > 1));
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = gaussian_matrix(4, 16, 0).unwrap();
        let den = DenoiserSpec::Identity;
        let o = AmpOptions::default();
        assert!(amp_reconstruct(&a, &[0.0; 3], (4, 4), &den, 5, &o).is_err());
        assert!(amp_reconstruct(&a, &[0.0; 4], (4, 3), &den, 5, &o).is_err());
        assert!(amp_reconstruct(&a, &[0.0; 4], (4, 4), &den, 0, &o).is_err());
    }

    #[test]
    fn trace_csv_format() {
        assert_eq!(trace_csv(&[2.0, 0.5]), "iteration,residual_norm\n1,2.0\n2,0.5\n");
    }
}
