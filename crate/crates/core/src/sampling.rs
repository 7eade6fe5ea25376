//! Measurement operators: dense Gaussian block matrices and full-image binary
//! masks, and the forward model `y = A x + n`.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blocks::{partition_slice, BlockGrid};
use crate::error::{Error, Result};
use crate::io::MaskRecord;
use crate::map::ParametricMap;

/// A linear map `R^n -> R^m` with its adjoint.
pub trait LinearOperator: Sync {
    /// Number of measurements `m`.
    fn rows(&self) -> usize;
    /// Signal dimension `n`.
    fn cols(&self) -> usize;
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    fn adjoint(&self, z: &[f64]) -> Vec<f64>;
}

/// Dense row-major `m x n` measurement matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    m: usize,
    n: usize,
    entries: Vec<f64>,
    seed: u64,
}

impl MeasurementMatrix {
    pub fn from_entries(m: usize, n: usize, entries: Vec<f64>, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::EmptyInput);
        }
        if m > n {
            return Err(Error::NotCompression { m, n });
        }
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch(format!(
                "{m}x{n} matrix needs {} entries, got {}",
                m * n,
                entries.len()
            )));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { m, n, entries, seed })
    }

    /// First `m` rows of the `n x n` identity.
    pub fn row_identity(m: usize, n: usize) -> Result<Self> {
        let mut entries = vec![0.0; m * n];
        for i in 0..m.min(n) {
            entries[i * n + i] = 1.0;
        }
        Self::from_entries(m, n, entries, 0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn compression_ratio(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// Serialises as a QAMP v1 map with unit label `matrix`.
    pub fn to_map(&self) -> Result<ParametricMap> {
        ParametricMap::new(self.m, self.n, self.entries.clone(), "matrix")
    }

    pub fn from_map(map: &ParametricMap) -> Result<Self> {
        if map.unit() != "matrix" {
            return Err(Error::InvalidPayload(format!(
                "expected unit label \"matrix\", got {:?}",
                map.unit()
            )));
        }
        Self::from_entries(map.rows(), map.cols(), map.data().to_vec(), 0)
    }
}

impl LinearOperator for MeasurementMatrix {
    fn rows(&self) -> usize {
        self.m
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        self.entries
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.m);
        let mut out = vec![0.0; self.n];
        for (row, &zi) in self.entries.chunks_exact(self.n).zip(z) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * zi;
            }
        }
        out
    }
}

/// `m x n` matrix with i.i.d. `N(0, 1/m)` entries, so every column has unit
/// expected squared norm.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput);
    }
    if m > n {
        return Err(Error::NotCompression { m, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let entries = (0..m * n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * scale
        })
        .collect();
    MeasurementMatrix::from_entries(m, n, entries, seed)
}

/// Gaussian matrix whose rows are then orthonormalised (modified Gram-Schmidt),
/// so that `A A^T = I`.
pub fn orthonormal_gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    let mut a = gaussian_matrix(m, n, seed)?;
    for i in 0..m {
        for j in 0..i {
            let dot: f64 = a.row(i).iter().zip(a.row(j)).map(|(x, y)| x * y).sum();
            let (head, tail) = a.entries.split_at_mut(i * n);
            let rj = &head[j * n..(j + 1) * n];
            for (x, y) in tail[..n].iter_mut().zip(rj) {
                *x -= dot * y;
            }
        }
        let norm = a.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidArgument("rank-deficient Gaussian draw".into()));
        }
        for v in &mut a.entries[i * n..(i + 1) * n] {
            *v /= norm;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Spiral,
    Random,
    Raster,
}

impl PatternKind {
    pub fn label(self) -> &'static str {
        match self {
            PatternKind::Spiral => "spiral",
            PatternKind::Random => "random",
            PatternKind::Raster => "raster",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "spiral" => Some(PatternKind::Spiral),
            "random" => Some(PatternKind::Random),
            "raster" => Some(PatternKind::Raster),
            _ => None,
        }
    }
}

/// Full-image binary acquisition pattern: 1 where the transducer fires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
    kind: PatternKind,
}

impl BinaryMask {
    pub fn new(rows: usize, cols: usize, cells: Vec<u8>, kind: PatternKind) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput);
        }
        if cells.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} mask with {} cells",
                cells.len()
            )));
        }
        if cells.iter().any(|&c| c > 1) {
            return Err(Error::InvalidPayload("mask cells must be 0 or 1".into()));
        }
        if cells.iter().all(|&c| c == 0) {
            return Err(Error::InvalidArgument("mask has no sampled cells".into()));
        }
        Ok(Self {
            rows,
            cols,
            cells,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    pub fn coverage(&self) -> f64 {
        self.count_ones() as f64 / self.cells.len() as f64
    }

    /// Row-major indices of the sampled cells.
    pub fn sampled_indices(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn row_selection(&self) -> RowSelection {
        RowSelection {
            indices: self.sampled_indices(),
            n: self.cells.len(),
        }
    }

    pub fn to_record(&self) -> MaskRecord {
        MaskRecord {
            rows: self.rows,
            cols: self.cols,
            cells: self.cells.clone(),
            label: self.kind.label().to_string(),
        }
    }

    pub fn from_record(record: MaskRecord) -> Result<Self> {
        let kind = PatternKind::from_label(&record.label)
            .ok_or_else(|| Error::InvalidPayload(format!("unknown mask kind {:?}", record.label)))?;
        Self::new(record.rows, record.cols, record.cells, kind)
    }
}

/// The `{0,1}` matrix that picks the sampled entries out of a vectorised image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSelection {
    indices: Vec<usize>,
    n: usize,
}

impl RowSelection {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.iter().any(|&i| i >= n) {
            return Err(Error::DimensionMismatch("selection index out of range".into()));
        }
        Ok(Self { indices, n })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl LinearOperator for RowSelection {
    fn rows(&self) -> usize {
        self.indices.len()
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| x[i]).collect()
    }

    fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&i, &v) in self.indices.iter().zip(z) {
            out[i] += v;
        }
        out
    }
}

/// Largest allowed gap between requested and achieved spiral coverage.
pub const SPIRAL_TOLERANCE: f64 = 0.02;
const SPIRAL_STROKE: f64 = 1.0;
const SPIRAL_BISECTION_STEPS: usize = 60;

fn spiral_cells(rows: usize, cols: usize, pitch: f64) -> Vec<u8> {
    // r = a * theta with arm spacing `pitch`
    let a = pitch / TAU;
    let (cy, cx) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let half = SPIRAL_STROKE / 2.0;
    let mut cells = vec![0u8; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let (dy, dx) = (r as f64 - cy, c as f64 - cx);
            let radius = dx.hypot(dy);
            let theta = dy.atan2(dx).rem_euclid(TAU);
            // nearest arm crossing along the ray at angle theta
            let turns = ((radius / a - theta) / TAU).round().max(0.0);
            let dist = (radius - a * (theta + TAU * turns)).abs();
            let prev = if turns > 0.0 {
                (radius - a * (theta + TAU * (turns - 1.0))).abs()
            } else {
                f64::INFINITY
            };
            if dist.min(prev) <= half {
                cells[r * cols + c] = 1;
            }
        }
    }
    cells
}

fn coverage_of(cells: &[u8]) -> f64 {
    cells.iter().filter(|&&c| c == 1).count() as f64 / cells.len() as f64
}

/// Archimedean spiral `r = a * theta` centred on the image with a one-pixel
/// stroke; the arm spacing is bisected until the coverage matches
/// `target_ratio` within [`SPIRAL_TOLERANCE`].
pub fn spiral_mask(rows: usize, cols: usize, target_ratio: f64) -> Result<BinaryMask> {
    if !(target_ratio > 0.0 && target_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target ratio {target_ratio} outside (0, 1]"
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput);
    }
    if target_ratio == 1.0 {
        return BinaryMask::new(rows, cols, vec![1; rows * cols], PatternKind::Spiral);
    }
    // coverage ~ stroke / pitch, decreasing in pitch
    let (mut lo, mut hi) = (SPIRAL_STROKE, (rows.max(cols) as f64) * 2.0);
    let mut best: Option<(f64, Vec<u8>)> = None;
    for _ in 0..SPIRAL_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let cells = spiral_cells(rows, cols, mid);
        let cov = coverage_of(&cells);
        let better = best
            .as_ref()
            .is_none_or(|(b, _)| (cov - target_ratio).abs() < (b - target_ratio).abs());
        if better {
            best = Some((cov, cells));
        }
        if cov > target_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-9 {
            break;
        }
    }
    let (achieved, cells) = best.expect("at least one bisection step");
    if (achieved - target_ratio).abs() > SPIRAL_TOLERANCE || !cells.contains(&1) {
        return Err(Error::CoverageUnreachable {
            target: target_ratio,
            achieved,
        });
    }
    BinaryMask::new(rows, cols, cells, PatternKind::Spiral)
}

/// Uniformly random mask with exactly `round(ratio * rows * cols)` ones (at least one).
pub fn random_mask(rows: usize, cols: usize, ratio: f64, seed: u64) -> Result<BinaryMask> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("ratio {ratio} outside (0, 1]")));
    }
    let n = rows * cols;
    let ones = ((ratio * n as f64).round() as usize).clamp(1, n.max(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut cells = vec![0u8; n];
    for &i in &idx[..ones.min(n)] {
        cells[i] = 1;
    }
    BinaryMask::new(rows, cols, cells, PatternKind::Random)
}

/// Scan-line decimation: keeps every `round(1/ratio)`-th row.
pub fn raster_mask(rows: usize, cols: usize, ratio: f64) -> Result<BinaryMask> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("ratio {ratio} outside (0, 1]")));
    }
    let stride = (1.0 / ratio).round().max(1.0) as usize;
    let mut cells = vec![0u8; rows * cols];
    for r in (0..rows).step_by(stride) {
        cells[r * cols..(r + 1) * cols].fill(1);
    }
    BinaryMask::new(rows, cols, cells, PatternKind::Raster)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingOperator {
    /// The same matrix applied to every `B x B` block (`n = B^2`).
    Matrix(MeasurementMatrix),
    /// One binary pattern over the whole image.
    Mask(BinaryMask),
}

impl SamplingOperator {
    pub fn compression_ratio(&self) -> f64 {
        compression_ratio(self)
    }
}

pub fn compression_ratio(op: &SamplingOperator) -> f64 {
    match op {
        SamplingOperator::Matrix(a) => a.compression_ratio(),
        SamplingOperator::Mask(mask) => mask.coverage(),
    }
}

/// Side of the square block that a matrix with `n` columns acts on.
pub fn block_side(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix width {n} is not a square block size"
        )));
    }
    Ok(side)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measurements {
    /// One measurement vector of length `m` per block.
    Blocks { grid: BlockGrid, y: Vec<Vec<f64>> },
    /// Sampled values in row-major order of the mask ones.
    Mask { rows: usize, cols: usize, y: Vec<f64> },
}

impl Measurements {
    pub fn total_len(&self) -> usize {
        match self {
            Measurements::Blocks { y, .. } => y.iter().map(Vec::len).sum(),
            Measurements::Mask { y, .. } => y.len(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Measurements::Blocks { grid, .. } => (grid.source_rows, grid.source_cols),
            Measurements::Mask { rows, cols, .. } => (*rows, *cols),
        }
    }

    fn values_mut(&mut self) -> Box<dyn Iterator<Item = &mut f64> + '_> {
        match self {
            Measurements::Blocks { y, .. } => Box::new(y.iter_mut().flatten()),
            Measurements::Mask { y, .. } => Box::new(y.iter_mut()),
        }
    }
}

/// Additive white Gaussian noise on the measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub std: f64,
    pub seed: u64,
}

/// A complete compressive-sensing instance `y = A x + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsProblem {
    pub operator: SamplingOperator,
    pub measurements: Measurements,
    pub noise_std: f64,
}

impl CsProblem {
    pub fn new(operator: SamplingOperator, measurements: Measurements, noise_std: f64) -> Result<Self> {
        match (&operator, &measurements) {
            (SamplingOperator::Matrix(a), Measurements::Blocks { grid, y }) => {
                if grid.block_size * grid.block_size != a.n() || y.iter().any(|b| b.len() != a.m()) {
                    return Err(Error::DimensionMismatch(
                        "block measurements do not match matrix".into(),
                    ));
                }
            }
            (SamplingOperator::Mask(mask), Measurements::Mask { rows, cols, y }) => {
                if (*rows, *cols) != (mask.rows(), mask.cols()) || y.len() != mask.count_ones() {
                    return Err(Error::DimensionMismatch("mask measurements do not match mask".into()));
                }
            }
            _ => return Err(Error::DimensionMismatch("operator and measurement kinds differ".into())),
        }
        if !(noise_std >= 0.0) {
            return Err(Error::InvalidArgument("noise std must be >= 0".into()));
        }
        Ok(Self {
            operator,
            measurements,
            noise_std,
        })
    }
}

/// Samples `x` with `op`, optionally adding white Gaussian noise.
pub fn apply_sampling(x: &ParametricMap, op: &SamplingOperator, noise: Option<NoiseSpec>) -> Result<Measurements> {
    let mut meas = match op {
        SamplingOperator::Matrix(a) => {
            let side = block_side(a.n())?;
            let grid = BlockGrid::new(x.rows(), x.cols(), side)?;
            let y = partition_slice(x.data(), &grid).iter().map(|b| a.forward(b)).collect();
            Measurements::Blocks { grid, y }
        }
        SamplingOperator::Mask(mask) => {
            if (mask.rows(), mask.cols()) != x.shape() {
                return Err(Error::DimensionMismatch(format!(
                    "{}x{} mask on {}x{} map",
                    mask.rows(),
                    mask.cols(),
                    x.rows(),
                    x.cols()
                )));
            }
            Measurements::Mask {
                rows: x.rows(),
                cols: x.cols(),
                y: mask.row_selection().forward(x.data()),
            }
        }
    };
    if let Some(noise) = noise {
        if !(noise.std >= 0.0) {
            return Err(Error::InvalidArgument("noise std must be >= 0".into()));
        }
        if noise.std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            for v in meas.values_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += noise.std * g;
            }
        }
    }
    Ok(meas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_is_deterministic() {
        let a = gaussian_matrix(16, 64, 0).unwrap();
        assert_eq!((a.m(), a.n()), (16, 64));
        assert_eq!(a, gaussian_matrix(16, 64, 0).unwrap());
        assert_ne!(a, gaussian_matrix(16, 64, 1).unwrap());
    }

    #[test]
    fn gaussian_column_norms() {
        let a = gaussian_matrix(16, 64, 0).unwrap();
        let mean_sq: f64 = (0..64)
            .map(|j| (0..16).map(|i| a.entries()[i * 64 + j].powi(2)).sum::<f64>())
            .sum::<f64>()
            / 64.0;
        assert!((0.7..=1.3).contains(&mean_sq), "{mean_sq}");
    }

    #[test]
    fn square_and_wide_shapes() {
        assert_eq!(gaussian_matrix(64, 64, 3).unwrap().compression_ratio(), 1.0);
        assert!(matches!(gaussian_matrix(65, 64, 0), Err(Error::NotCompression { .. })));
        let op = SamplingOperator::Matrix(gaussian_matrix(16, 64, 0).unwrap());
        assert_eq!(compression_ratio(&op), 0.25);
    }

    #[test]
    fn orthonormal_rows() {
        let a = orthonormal_gaussian_matrix(8, 32, 5).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = a.row(i).iter().zip(a.row(j)).map(|(x, y)| x * y).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spiral_full_coverage() {
        let m = spiral_mask(10, 12, 1.0).unwrap();
        assert!(m.cells().iter().all(|&c| c == 1));
        assert_eq!(compression_ratio(&SamplingOperator::Mask(m)), 1.0);
    }

    #[test]
    fn spiral_quarter_coverage() {
        let m = spiral_mask(64, 64, 0.25).unwrap();
        let ones = m.count_ones();
        assert!((943..=1105).contains(&ones), "{ones}");
        assert_eq!(m, spiral_mask(64, 64, 0.25).unwrap());
        assert!(spiral_mask(64, 64, 0.0).is_err());
        assert!(spiral_mask(64, 64, 1.5).is_err());
    }

    #[test]
    fn spiral_hits_range_of_targets() {
        for target in [0.1, 0.2, 0.3, 0.5, 0.7] {
            let m = spiral_mask(64, 48, target).unwrap();
            assert!(
                (m.coverage() - target).abs() <= SPIRAL_TOLERANCE,
                "{target}: {}",
                m.coverage()
            );
        }
    }

    #[test]
    fn random_and_raster_masks() {
        let r = random_mask(10, 10, 0.3, 1).unwrap();
        assert_eq!(r.count_ones(), 30);
        assert_eq!(r, random_mask(10, 10, 0.3, 1).unwrap());
        let s = raster_mask(8, 5, 0.25).unwrap();
        assert_eq!(s.count_ones(), 10);
        assert_eq!(&s.cells()[..5], &[1; 5]);
    }

    #[test]
    fn identity_rows_pick_prefix() {
        let a = MeasurementMatrix::row_identity(4, 16).unwrap();
        let x: Vec<f64> = (1..=16).map(f64::from).collect();
        assert_eq!(a.forward(&x), vec![1.0, 2.0, 3.0, 4.0]);
        let map = ParametricMap::new(4, 4, x, "").unwrap();
        let y = apply_sampling(&map, &SamplingOperator::Matrix(a), None).unwrap();
        match y {
            Measurements::Blocks { y, .. } => assert_eq!(y, vec![vec![1.0, 2.0, 3.0, 4.0]]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_mask_pixel() {
        let mut cells = vec![0u8; 9];
        cells[0] = 1;
        let mask = BinaryMask::new(3, 3, cells, PatternKind::Random).unwrap();
        let mut data = vec![1.0; 9];
        data[0] = 7.0;
        let map = ParametricMap::new(3, 3, data, "").unwrap();
        let y = apply_sampling(&map, &SamplingOperator::Mask(mask), None).unwrap();
        assert_eq!(
            y,
            Measurements::Mask {
                rows: 3,
                cols: 3,
                y: vec![7.0]
            }
        );
    }

    #[test]
    fn noise_statistics() {
        let a = gaussian_matrix(16, 64, 2).unwrap();
        let x = ParametricMap::from_fn(8, 8, "", |r, c| (r as f64 - c as f64) * 0.1).unwrap();
        let op = SamplingOperator::Matrix(a);
        let clean = match apply_sampling(&x, &op, None).unwrap() {
            Measurements::Blocks { y, .. } => y.concat(),
            _ => unreachable!(),
        };
        let mut resid = Vec::with_capacity(10_000);
        let mut mean = vec![0.0; clean.len()];
        let draws = 10_000 / clean.len() + 1;
        for seed in 0..draws as u64 {
            let noisy = match apply_sampling(&x, &op, Some(NoiseSpec { std: 0.1, seed })).unwrap() {
                Measurements::Blocks { y, .. } => y.concat(),
                _ => unreachable!(),
            };
            for ((n, c), m) in noisy.iter().zip(&clean).zip(&mut mean) {
                resid.push(n - c);
                *m += n / draws as f64;
            }
        }
        let mu = resid.iter().sum::<f64>() / resid.len() as f64;
        let sd = (resid.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / (resid.len() - 1) as f64).sqrt();
        assert!((0.095..=0.105).contains(&sd), "{sd}");
        // mean of draws approaches the noiseless measurement
        for (m, c) in mean.iter().zip(&clean) {
            assert!((m - c).abs() < 5.0 * 0.1 / (draws as f64).sqrt());
        }
    }

    #[test]
    fn mask_matches_row_selection_matrix() {
        let mask = random_mask(5, 6, 0.4, 9).unwrap();
        let x = ParametricMap::from_fn(5, 6, "", |r, c| (r * 7 + c * 3) as f64 * 0.5 - 4.0).unwrap();
        let ones = mask.sampled_indices();
        // dense {0,1} matrix with one 1 per row
        let n = 30;
        let mut dense = vec![0.0; ones.len() * n];
        for (row, &i) in ones.iter().enumerate() {
            dense[row * n + i] = 1.0;
        }
        let expected: Vec<f64> = dense
            .chunks(n)
            .map(|r| r.iter().zip(x.data()).map(|(a, b)| a * b).sum())
            .collect();
        let got = apply_sampling(&x, &SamplingOperator::Mask(mask), None).unwrap();
        assert_eq!(
            got,
            Measurements::Mask {
                rows: 5,
                cols: 6,
                y: expected
            }
        );
    }

    #[test]
    fn dimension_mismatch() {
        let mask = random_mask(4, 4, 0.5, 0).unwrap();
        let x = ParametricMap::zeros(4, 5, "").unwrap();
        assert!(apply_sampling(&x, &SamplingOperator::Mask(mask), None).is_err());
        let a = gaussian_matrix(4, 12, 0).unwrap();
        assert!(apply_sampling(&x, &SamplingOperator::Matrix(a), None).is_err());
    }

    fn flat(m: Measurements) -> Vec<f64> {
        match m {
            Measurements::Blocks { y, .. } => y.concat(),
            Measurements::Mask { y, .. } => y,
        }
    }

    proptest! {
        #[test]
        fn sampling_is_linear(
            seed in 0u64..1000,
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
            xs in proptest::collection::vec(-10.0f64..10.0, 2 * 7 * 9),
        ) {
            let x1 = ParametricMap::new(7, 9, xs[..63].to_vec(), "").unwrap();
            let x2 = ParametricMap::new(7, 9, xs[63..].to_vec(), "").unwrap();
            let combo = ParametricMap::new(7, 9,
                x1.data().iter().zip(x2.data()).map(|(a, b)| alpha * a + beta * b).collect(), "").unwrap();
            let ops = [
                SamplingOperator::Matrix(gaussian_matrix(5, 16, seed).unwrap()),
                SamplingOperator::Mask(random_mask(7, 9, 0.3, seed).unwrap()),
            ];
            for op in &ops {
                let y1 = flat(apply_sampling(&x1, op, None).unwrap());
                let y2 = flat(apply_sampling(&x2, op, None).unwrap());
                let yc = flat(apply_sampling(&combo, op, None).unwrap());
                for ((a, b), c) in y1.iter().zip(&y2).zip(&yc) {
                    prop_assert!((alpha * a + beta * b - c).abs() < 1e-12 * (1.0 + c.abs()));
                }
            }
        }

        #[test]
        fn adjoint_identity(seed in 0u64..500, xs in proptest::collection::vec(-1.0f64..1.0, 36), zs in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let a = gaussian_matrix(9, 36, seed).unwrap();
            let lhs: f64 = a.forward(&xs).iter().zip(&zs).map(|(p, q)| p * q).sum();
            let rhs: f64 = a.adjoint(&zs).iter().zip(&xs).map(|(p, q)| p * q).sum();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
