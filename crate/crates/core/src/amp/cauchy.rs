//! MAP shrinkage under a Cauchy prior.
//!
//! For an observation `y = x + N(0, sigma^2)` and prior `p(x) ~ gamma / (gamma^2 + x^2)`
//! the MAP estimate minimises `(y - x)^2 / (2 sigma^2) + ln(gamma^2 + x^2)`, whose
//! stationary points are the real roots of
//! `x^3 - y x^2 + (gamma^2 + 2 sigma^2) x - gamma^2 y = 0`.

use std::f64::consts::TAU;

/// Negative log posterior up to a constant.
pub fn map_objective(x: f64, y: f64, gamma: f64, sigma: f64) -> f64 {
    (y - x).powi(2) / (2.0 * sigma * sigma) + (gamma * gamma + x * x).ln()
}

/// Real roots of `x^3 + b x^2 + c x + d`, each polished by Newton steps.
pub(crate) fn cubic_real_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc > 0.0 {
        let s = disc.sqrt();
        // avoid cancellation: pick the larger-magnitude branch
        let u = (-q / 2.0 + if q <= 0.0 { s } else { -s }).cbrt();
        let t = if u != 0.0 { u - p / (3.0 * u) } else { 0.0 };
        vec![t - shift]
    } else if p == 0.0 {
        vec![-shift]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3).map(|k| m * (phi - TAU * k as f64 / 3.0).cos() - shift).collect()
    };
    for r in &mut roots {
        for _ in 0..4 {
            let f = ((*r + b) * *r + c) * *r + d;
            let df = (3.0 * *r + 2.0 * b) * *r + c;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots
}

/// Cauchy-prior MAP estimate of a single coefficient.
pub fn cauchy_map_scalar(y: f64, gamma: f64, sigma: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    if sigma == 0.0 {
        return y;
    }
    let g2 = gamma * gamma;
    let roots = cubic_real_roots(-y, g2 + 2.0 * sigma * sigma, -g2 * y);
    roots
        .into_iter()
        // stationary points lie between 0 and y
        .map(|r| if y > 0.0 { r.clamp(0.0, y) } else { r.clamp(y, 0.0) })
        .min_by(|a, b| map_objective(*a, y, gamma, sigma).total_cmp(&map_objective(*b, y, gamma, sigma)))
        .unwrap_or(y)
}

/// Elementwise Cauchy MAP shrinkage.
pub fn cauchy_map_denoise(v: &[f64], gamma: f64, sigma: f64) -> Vec<f64> {
    v.iter().map(|&y| cauchy_map_scalar(y, gamma, sigma)).collect()
}
