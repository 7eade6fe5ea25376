use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::map::ParametricMap;

pub const SOS_UNIT: &str = "m/s";
pub const DEFAULT_THICKNESS: f64 = 6e-6;
pub const DEFAULT_COUPLING_SPEED: f64 = 1500.0;
pub const BACKGROUND_MEAN: f64 = 1500.0;
/// Amplitude of each of the two background sinusoids.
pub const BACKGROUND_RIPPLE: f64 = 10.0;
/// Smallest semi-axis of an inclusion, in pixels.
pub const MIN_SEMI_AXIS: usize = 2;
/// Pixel count of the smallest admissible inclusion (a disc of radius 2
/// centred on a pixel).
pub const MIN_INCLUSION_PIXELS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub n_inclusions: usize,
    /// Inclusion values are drawn uniformly from this range.
    pub value_range: (f64, f64),
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            n_inclusions: 4,
            value_range: (1560.0, 1650.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub sos_map: ParametricMap,
    /// Section thickness in metres.
    pub thickness: f64,
    /// Coupling-medium speed in m/s.
    pub c0: f64,
    /// Number of inclusions actually placed (may fall short of the request
    /// when the map is too crowded).
    pub inclusions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cy: f64,
    cx: f64,
    ay: f64,
    ax: f64,
    angle: f64,
}

impl Ellipse {
    fn contains(&self, r: f64, c: f64) -> bool {
        let (dy, dx) = (r - self.cy, c - self.cx);
        let (s, co) = self.angle.sin_cos();
        let u = dx * co + dy * s;
        let v = -dx * s + dy * co;
        (u / self.ax).powi(2) + (v / self.ay).powi(2) <= 1.0
    }

    /// Conservative: bounding circles must not touch.
    fn overlaps(&self, other: &Ellipse) -> bool {
        let d = ((self.cy - other.cy).powi(2) + (self.cx - other.cx).powi(2)).sqrt();
        d <= self.ax.max(self.ay) + other.ax.max(other.ay) + 1.0
    }
}

/// Smooth background in `[1480, 1520]` m/s with non-overlapping elliptical
/// inclusions. Deterministic in `seed`.
pub fn generate_phantom(rows: usize, cols: usize, spec: &PhantomSpec, seed: u64) -> Result<Phantom> {
    if rows < 8 || cols < 8 {
        return Err(Error::InvalidArgument(format!(
            "phantom must be at least 8x8, got {rows}x{cols}"
        )));
    }
    let (lo, hi) = spec.value_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument("invalid inclusion value range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> = (0..2)
        .map(|_| {
            let fy = rng.random_range(0.5..2.0) / rows as f64;
            let fx = rng.random_range(0.5..2.0) / cols as f64;
            (fy, fx, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let mut data: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let (r, c) = ((i / cols) as f64, (i % cols) as f64);
            BACKGROUND_MEAN
                + waves
                    .iter()
                    .map(|&(fy, fx, ph)| BACKGROUND_RIPPLE * (2.0 * PI * (fy * r + fx * c) + ph).sin())
                    .sum::<f64>()
        })
        .collect();

    let max_axis = (rows.min(cols) / 6).max(MIN_SEMI_AXIS) as f64;
    let mut placed: Vec<Ellipse> = Vec::with_capacity(spec.n_inclusions);
    let mut attempts = 0;
    while placed.len() < spec.n_inclusions && attempts < 200 * spec.n_inclusions.max(1) {
        attempts += 1;
        let ay = rng.random_range(MIN_SEMI_AXIS as f64..=max_axis);
        let ax = rng.random_range(MIN_SEMI_AXIS as f64..=max_axis);
        let reach = ay.max(ax).ceil() as usize;
        if 2 * reach + 1 > rows || 2 * reach + 1 > cols {
            continue;
        }
        let cy = rng.random_range(reach..rows - reach) as f64;
        let cx = rng.random_range(reach..cols - reach) as f64;
        let e = Ellipse {
            cy,
            cx,
            ay,
            ax,
            angle: rng.random_range(0.0..PI),
        };
        let value = if lo == hi { lo } else { rng.random_range(lo..hi) };
        if placed.iter().any(|p| p.overlaps(&e)) {
            continue;
        }
        for (i, v) in data.iter_mut().enumerate() {
            if e.contains((i / cols) as f64, (i % cols) as f64) {
                *v = value;
            }
        }
        placed.push(e);
    }
    Ok(Phantom {
        sos_map: ParametricMap::new(rows, cols, data, SOS_UNIT)?,
        thickness: DEFAULT_THICKNESS,
        c0: DEFAULT_COUPLING_SPEED,
        inclusions: placed.len(),
    })
}
