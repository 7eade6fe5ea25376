//! Denoisers plugged into the AMP iteration.

use super::cauchy::cauchy_map_scalar;
use super::haar;
use crate::error::{Error, Result};

/// How the shrinkage threshold is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Constant `lambda`.
    Fixed(f64),
    /// `lambda_k = tau * sigma_hat_k`.
    Scaled(f64),
}

impl Threshold {
    fn resolve(self, sigma_hat: f64) -> f64 {
        match self {
            Threshold::Fixed(l) => l,
            Threshold::Scaled(tau) => tau * sigma_hat,
        }
    }

    fn validate(self) -> Result<()> {
        let v = match self {
            Threshold::Fixed(v) | Threshold::Scaled(v) => v,
        };
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!("threshold parameter {v} must be >= 0")));
        }
        Ok(())
    }
}

/// Denoiser selection for [`super::amp_reconstruct`].
#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserSpec {
    /// Passes the pseudo-data through unchanged.
    Identity,
    /// Elementwise soft threshold in the canonical basis.
    Soft { threshold: Threshold },
    /// Soft threshold on orthonormal Haar detail coefficients.
    SoftWavelet { threshold: Threshold, levels: usize },
    /// Cauchy MAP shrinkage of Haar detail coefficients. `gamma: None` fits the
    /// scale per subband as `median(|c|)`; `sigma: None` uses the current noise
    /// estimate.
    CauchyMap {
        gamma: Option<f64>,
        sigma: Option<f64>,
        levels: usize,
    },
    /// Returns the stored reference signal. Test instrumentation only.
    Oracle(Vec<f64>),
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DenoiserSpec::Identity | DenoiserSpec::Oracle(_) => Ok(()),
            DenoiserSpec::Soft { threshold } | DenoiserSpec::SoftWavelet { threshold, .. } => threshold.validate(),
            DenoiserSpec::CauchyMap { gamma, sigma, .. } => {
                if gamma.is_some_and(|g| !(g > 0.0)) {
                    return Err(Error::InvalidArgument("Cauchy gamma must be > 0".into()));
                }
                if sigma.is_some_and(|s| !(s >= 0.0)) {
                    return Err(Error::InvalidArgument("Cauchy sigma must be >= 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Applies the denoiser to the `rows x cols` pseudo-data `v`.
    pub fn apply(&self, v: &[f64], shape: (usize, usize), sigma_hat: f64) -> Result<Vec<f64>> {
        let (rows, cols) = shape;
        if v.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} denoiser input with {} values",
                v.len()
            )));
        }
        match self {
            DenoiserSpec::Identity => Ok(v.to_vec()),
            DenoiserSpec::Soft { threshold } => {
                let lambda = threshold.resolve(sigma_hat);
                Ok(v.iter().map(|&c| soft(c, lambda)).collect())
            }
            DenoiserSpec::SoftWavelet { threshold, levels } => {
                soft_threshold_denoise(v, shape, threshold.resolve(sigma_hat), *levels)
            }
            DenoiserSpec::CauchyMap { gamma, sigma, levels } => {
                let sigma = sigma.unwrap_or(sigma_hat);
                let mut coeffs = haar::forward(v, rows, cols, *levels)?;
                for band in haar::detail_subbands(rows, cols, *levels) {
                    let g = match gamma {
                        Some(g) => *g,
                        None => median_abs(&coeffs, &band).max(1e-12),
                    };
                    for i in band {
                        coeffs[i] = cauchy_map_scalar(coeffs[i], g, sigma);
                    }
                }
                haar::inverse(&coeffs, rows, cols, *levels)
            }
            DenoiserSpec::Oracle(x) => {
                if x.len() != v.len() {
                    return Err(Error::DimensionMismatch("oracle length differs from signal".into()));
                }
                Ok(x.clone())
            }
        }
    }
}

/// `sign(c) * max(|c| - lambda, 0)`.
#[inline]
pub fn soft(c: f64, lambda: f64) -> f64 {
    if c > lambda {
        c - lambda
    } else if c < -lambda {
        c + lambda
    } else {
        0.0
    }
}

fn median_abs(coeffs: &[f64], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let mut a: Vec<f64> = idx.iter().map(|&i| coeffs[i].abs()).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    }
}

/// Orthonormal Haar transform to `levels`, soft threshold of the detail
/// coefficients, inverse transform. The coarse approximation is left untouched.
pub fn soft_threshold_denoise(v: &[f64], shape: (usize, usize), lambda: f64, levels: usize) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {lambda} must be >= 0")));
    }
    let (rows, cols) = shape;
    let mut coeffs = haar::forward(v, rows, cols, levels)?;
    if lambda == 0.0 {
        return Ok(v.to_vec());
    }
    for band in haar::detail_subbands(rows, cols, levels) {
        for i in band {
            coeffs[i] = soft(coeffs[i], lambda);
        }
    }
    haar::inverse(&coeffs, rows, cols, levels)
}
