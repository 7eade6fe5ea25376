//! Reconstruction quality metrics.

use crate::error::{Error, Result};
use crate::map::ParametricMap;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_dims(reference: &ParametricMap, test: &ParametricMap) -> Result<()> {
    if reference.shape() != test.shape() {
        return Err(Error::DimensionMismatch(format!(
            "reference is {:?}, test is {:?}",
            reference.shape(),
            test.shape()
        )));
    }
    Ok(())
}

pub fn rmse(reference: &ParametricMap, test: &ParametricMap) -> Result<f64> {
    check_dims(reference, test)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / reference.len() as f64).sqrt())
}

/// Dynamic range of the reference, `max - min`.
pub fn default_peak(reference: &ParametricMap) -> f64 {
    reference.max() - reference.min()
}

fn resolve_peak(reference: &ParametricMap, peak: Option<f64>) -> Result<f64> {
    let p = peak.unwrap_or_else(|| default_peak(reference));
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "peak must be positive and finite, got {p}"
        )));
    }
    Ok(p)
}

/// `20 log10(peak / rmse)`; `+inf` for identical maps.
pub fn psnr(reference: &ParametricMap, test: &ParametricMap, peak: Option<f64>) -> Result<f64> {
    let e = rmse(reference, test)?;
    let p = resolve_peak(reference, peak)?;
    Ok(psnr_from_rmse(e, p))
}

pub fn psnr_from_rmse(rmse: f64, peak: f64) -> f64 {
    if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / rmse).log10()
    }
}

/// Normalised 1-D Gaussian taps for the SSIM window.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let h = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - h;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable "valid" Gaussian filtering.
fn filter_valid(data: &[f64], rows: usize, cols: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (or, oc) = (rows + 1 - SSIM_WINDOW, cols + 1 - SSIM_WINDOW);
    let mut horiz = vec![0.0; rows * oc];
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        for c in 0..oc {
            horiz[r * oc + c] = w.iter().zip(&row[c..c + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for c in 0..oc {
            out[r * oc + c] = (0..SSIM_WINDOW).map(|k| w[k] * horiz[(r + k) * oc + c]).sum();
        }
    }
    out
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows, with dynamic
/// range `range`.
pub fn ssim_with_range(reference: &ParametricMap, test: &ParametricMap, range: f64) -> Result<f64> {
    check_dims(reference, test)?;
    let (rows, cols) = reference.shape();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {rows}x{cols}"
        )));
    }
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dynamic range must be positive, got {range}"
        )));
    }
    let w = gaussian_window();
    let x = reference.data();
    let y = test.data();
    let prod = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..x.len()).map(f).collect() };
    let mu_x = filter_valid(x, rows, cols, &w);
    let mu_y = filter_valid(y, rows, cols, &w);
    let xx = filter_valid(&prod(&|i| x[i] * x[i]), rows, cols, &w);
    let yy = filter_valid(&prod(&|i| y[i] * y[i]), rows, cols, &w);
    let xy = filter_valid(&prod(&|i| x[i] * y[i]), rows, cols, &w);
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = xx[i] - mx * mx;
            let vy = yy[i] - my * my;
            let cxy = xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// SSIM with the reference dynamic range (1 for a constant reference).
pub fn ssim(reference: &ParametricMap, test: &ParametricMap) -> Result<f64> {
    let range = default_peak(reference);
    ssim_with_range(reference, test, if range > 0.0 { range } else { 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub rmse: f64,
    pub ssim: f64,
    pub peak_used: f64,
}

impl MetricReport {
    /// `method,freq_label,psnr,rmse,ssim`
    pub fn csv_row(&self, method: &str, freq_label: &str) -> String {
        format!(
            "{method},{freq_label},{},{},{}",
            format_float(self.psnr_db),
            format_float(self.rmse),
            format_float(self.ssim)
        )
    }
}

pub const REPORT_CSV_HEADER: &str = "method,freq_label,psnr,rmse,ssim";

/// All three metrics; `peak` defaults to the reference dynamic range and
/// is also used as the SSIM range.
pub fn evaluate(reference: &ParametricMap, test: &ParametricMap, peak: Option<f64>) -> Result<MetricReport> {
    let peak_used = resolve_peak(reference, peak)?;
    let e = rmse(reference, test)?;
    Ok(MetricReport {
        psnr_db: psnr_from_rmse(e, peak_used),
        rmse: e,
        ssim: ssim_with_range(reference, test, peak_used)?,
        peak_used,
    })
}

/// Shortest round-trip representation; infinities as `inf` / `-inf`.
pub fn format_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:?}")
    }
}
