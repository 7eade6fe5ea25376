//! Row-major grids of physical values.

use crate::error::{Error, Result};

/// A 2-D grid of finite physical values (speed of sound in m/s, normalised
/// intensities, ...) stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    unit: String,
}

impl ParametricMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, unit: impl Into<String>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput);
        }
        let len = rows.checked_mul(cols).ok_or(Error::SizeOverflow {
            rows: rows as u64,
            cols: cols as u64,
        })?;
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} map needs {len} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let unit = unit.into();
        if unit.len() > u8::MAX as usize {
            return Err(Error::InvalidArgument("unit label longer than 255 bytes".into()));
        }
        Ok(Self { rows, cols, data, unit })
    }

    pub fn zeros(rows: usize, cols: usize, unit: impl Into<String>) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols], unit)
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        unit: impl Into<String>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data, unit)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Applies `f` to every value, keeping the shape. Fails if `f` produces a
    /// non-finite value.
    pub fn map_values(&self, unit: impl Into<String>, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect(), unit)
    }

    /// Plain CSV export: one line per row, comma separated, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.data.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}
