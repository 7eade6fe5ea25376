//! 3x3 "same" cross-correlation with zero borders, and its adjoints.
//!
//! `out[i][j] = sum_{a,b} k[a][b] * in[i + a - 1][j + b - 1]`, kernels stored
//! row-major as 9 values.

pub const TAPS: usize = 9;

/// Output row/column ranges for which tap `t` reads inside the image, and
/// the signed offsets `(da, db)` of the input sample it reads.
#[inline]
fn tap_ranges(t: usize, rows: usize, cols: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>, isize, isize) {
    let da = (t / 3) as isize - 1;
    let db = (t % 3) as isize - 1;
    let r = (if da < 0 { 1 } else { 0 })..(if da > 0 { rows.saturating_sub(1) } else { rows });
    let c = (if db < 0 { 1 } else { 0 })..(if db > 0 { cols.saturating_sub(1) } else { cols });
    (r, c, da, db)
}

#[inline]
fn shifted(i: usize, j: usize, da: isize, db: isize, cols: usize) -> usize {
    (i as isize + da) as usize * cols + (j as isize + db) as usize
}

/// `out += k * input`.
pub fn conv3x3_acc(input: &[f64], rows: usize, cols: usize, kernel: &[f64], out: &mut [f64]) {
    debug_assert_eq!(kernel.len(), TAPS);
    for (t, &k) in kernel.iter().enumerate() {
        let (rr, cr, da, db) = tap_ranges(t, rows, cols);
        if cr.is_empty() {
            continue;
        }
        for i in rr {
            let src = shifted(i, cr.start, da, db, cols);
            let dst = &mut out[i * cols + cr.start..i * cols + cr.end];
            for (o, v) in dst.iter_mut().zip(&input[src..src + cr.len()]) {
                *o += k * v;
            }
        }
    }
}

pub fn conv3x3(input: &[f64], rows: usize, cols: usize, kernel: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    conv3x3_acc(input, rows, cols, kernel, &mut out);
    out
}

/// Adjoint of [`conv3x3_acc`] in the input: `grad_in += k^T * grad_out`.
pub fn conv3x3_adjoint_acc(grad_out: &[f64], rows: usize, cols: usize, kernel: &[f64], grad_in: &mut [f64]) {
    for (t, &k) in kernel.iter().enumerate() {
        let (rr, cr, da, db) = tap_ranges(t, rows, cols);
        if cr.is_empty() {
            continue;
        }
        for i in rr {
            let dst = shifted(i, cr.start, da, db, cols);
            let src = &grad_out[i * cols + cr.start..i * cols + cr.end];
            for (o, g) in grad_in[dst..dst + cr.len()].iter_mut().zip(src) {
                *o += k * g;
            }
        }
    }
}

/// Gradient of `<grad_out, k * input>` with respect to `k`, accumulated.
pub fn conv3x3_kernel_grad_acc(input: &[f64], grad_out: &[f64], rows: usize, cols: usize, grad_k: &mut [f64]) {
    for (t, gk) in grad_k.iter_mut().enumerate().take(TAPS) {
        let (rr, cr, da, db) = tap_ranges(t, rows, cols);
        if cr.is_empty() {
            continue;
        }
        let mut acc = 0.0;
        for i in rr {
            let src = shifted(i, cr.start, da, db, cols);
            let g = &grad_out[i * cols + cr.start..i * cols + cr.end];
            acc += input[src..src + cr.len()]
                .iter()
                .zip(g)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        *gk += acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo(n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + s) * 1.618).sin()).collect()
    }

    #[test]
    fn identity_kernel() {
        let mut k = [0.0; 9];
        k[4] = 1.0;
        let x = pseudo(20, 0.0);
        assert_eq!(conv3x3(&x, 4, 5, &k), x);
    }

    #[test]
    fn shift_kernel_zero_border() {
        // k[1][2]: out[i][j] = in[i][j+1]
        let mut k = [0.0; 9];
        k[5] = 1.0;
        let x: Vec<f64> = (1..=6).map(f64::from).collect();
        assert_eq!(conv3x3(&x, 2, 3, &k), vec![2.0, 3.0, 0.0, 5.0, 6.0, 0.0]);
    }

    #[test]
    fn adjoint_and_kernel_grad_identities() {
        let (rows, cols) = (5, 7);
        let x = pseudo(rows * cols, 1.0);
        let g = pseudo(rows * cols, 7.0);
        let k = pseudo(9, 3.0);
        let kx = conv3x3(&x, rows, cols, &k);
        let lhs: f64 = kx.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut adj = vec![0.0; rows * cols];
        conv3x3_adjoint_acc(&g, rows, cols, &k, &mut adj);
        let rhs: f64 = adj.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let mut gk = vec![0.0; 9];
        conv3x3_kernel_grad_acc(&x, &g, rows, cols, &mut gk);
        let rhs2: f64 = gk.iter().zip(&k).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs2).abs() < 1e-12);
    }
}
