//! Orthonormal multi-level 2-D Haar transform in Mallat layout.
//!
//! After one level on an `h x w` region the approximation sits in the top-left
//! `h/2 x w/2` quadrant with the horizontal, vertical and diagonal details in
//! the top-right, bottom-left and bottom-right quadrants.

use crate::error::{Error, Result};

fn check(rows: usize, cols: usize, levels: usize, len: usize) -> Result<()> {
    if rows * cols != len {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} image with {len} values"
        )));
    }
    let unit = 1usize.checked_shl(levels as u32).unwrap_or(0);
    if unit == 0 || !rows.is_multiple_of(unit) || !cols.is_multiple_of(unit) {
        return Err(Error::InvalidArgument(format!(
            "{rows}x{cols} not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

pub fn forward(data: &[f64], rows: usize, cols: usize, levels: usize) -> Result<Vec<f64>> {
    check(rows, cols, levels, data.len())?;
    let mut out = data.to_vec();
    let mut tmp = vec![0.0; data.len()];
    let (mut h, mut w) = (rows, cols);
    for _ in 0..levels {
        let (h2, w2) = (h / 2, w / 2);
        for i in 0..h2 {
            for j in 0..w2 {
                let a = out[2 * i * cols + 2 * j];
                let b = out[2 * i * cols + 2 * j + 1];
                let c = out[(2 * i + 1) * cols + 2 * j];
                let d = out[(2 * i + 1) * cols + 2 * j + 1];
                tmp[i * cols + j] = (a + b + c + d) / 2.0;
                tmp[i * cols + j + w2] = (a - b + c - d) / 2.0;
                tmp[(i + h2) * cols + j] = (a + b - c - d) / 2.0;
                tmp[(i + h2) * cols + j + w2] = (a - b - c + d) / 2.0;
            }
        }
        for i in 0..h {
            out[i * cols..i * cols + w].copy_from_slice(&tmp[i * cols..i * cols + w]);
        }
        h = h2;
        w = w2;
    }
    Ok(out)
}

pub fn inverse(coeffs: &[f64], rows: usize, cols: usize, levels: usize) -> Result<Vec<f64>> {
    check(rows, cols, levels, coeffs.len())?;
    let mut out = coeffs.to_vec();
    let mut tmp = vec![0.0; coeffs.len()];
    for level in (0..levels).rev() {
        let (h, w) = (rows >> level, cols >> level);
        let (h2, w2) = (h / 2, w / 2);
        for i in 0..h2 {
            for j in 0..w2 {
                let a = out[i * cols + j];
                let hd = out[i * cols + j + w2];
                let vd = out[(i + h2) * cols + j];
                let dd = out[(i + h2) * cols + j + w2];
                tmp[2 * i * cols + 2 * j] = (a + hd + vd + dd) / 2.0;
                tmp[2 * i * cols + 2 * j + 1] = (a - hd + vd - dd) / 2.0;
                tmp[(2 * i + 1) * cols + 2 * j] = (a + hd - vd - dd) / 2.0;
                tmp[(2 * i + 1) * cols + 2 * j + 1] = (a - hd - vd + dd) / 2.0;
            }
        }
        for i in 0..h {
            out[i * cols..i * cols + w].copy_from_slice(&tmp[i * cols..i * cols + w]);
        }
    }
    Ok(out)
}

/// Row-major coefficient indices of every detail subband, finest level first,
/// in the order horizontal, vertical, diagonal.
pub fn detail_subbands(rows: usize, cols: usize, levels: usize) -> Vec<Vec<usize>> {
    let mut bands = Vec::with_capacity(3 * levels);
    for level in 0..levels {
        let (h, w) = (rows >> level, cols >> level);
        let (h2, w2) = (h / 2, w / 2);
        for (r0, c0) in [(0, w2), (h2, 0), (h2, w2)] {
            let mut idx = Vec::with_capacity(h2 * w2);
            for i in 0..h2 {
                for j in 0..w2 {
                    idx.push((r0 + i) * cols + c0 + j);
                }
            }
            bands.push(idx);
        }
    }
    bands
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_coefficients() {
        let c = forward(&[4.0, 2.0, 2.0, 0.0], 2, 2, 1).unwrap();
        assert_eq!(c, vec![4.0, 2.0, 2.0, 0.0]);
        let c = forward(&[1.0, 2.0, 3.0, 4.0], 2, 2, 1).unwrap();
        assert_eq!(c, vec![5.0, -1.0, -2.0, 0.0]);
    }

    #[test]
    fn round_trip_and_energy() {
        let data: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for levels in 0..=3 {
            let c = forward(&data, 8, 8, levels).unwrap();
            let e1: f64 = data.iter().map(|v| v * v).sum();
            let e2: f64 = c.iter().map(|v| v * v).sum();
            assert!((e1 - e2).abs() < 1e-9);
            let back = inverse(&c, 8, 8, levels).unwrap();
            for (a, b) in back.iter().zip(&data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subbands_partition_details() {
        let bands = detail_subbands(8, 4, 2);
        assert_eq!(bands.len(), 6);
        let total: usize = bands.iter().map(Vec::len).sum();
        // everything except the 2x1 approximation
        assert_eq!(total, 32 - 2);
    }

    #[test]
    fn divisibility() {
        assert!(forward(&[0.0; 6], 2, 3, 1).is_err());
        assert!(forward(&[0.0; 16], 4, 4, 3).is_err());
    }
}
