//! Parameters of the unfolded network and their flat layout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::conv::{conv3x3_acc, TAPS};
use crate::error::{Error, Result};
use crate::sampling::{orthonormal_gaussian_matrix, MeasurementMatrix};

/// Per-iteration trainable correction `N_k`: two 3x3 convolution layers
/// (1 -> C -> 1 channels) with a rectifier in between, no biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedDenoiser {
    channels: usize,
    /// `C` kernels of the first layer, 9 taps each.
    pub conv1: Vec<f64>,
    /// `C` kernels of the second layer, 9 taps each.
    pub conv2: Vec<f64>,
}

impl LearnedDenoiser {
    pub fn new(channels: usize, conv1: Vec<f64>, conv2: Vec<f64>) -> Result<Self> {
        if channels == 0 || conv1.len() != channels * TAPS || conv2.len() != channels * TAPS {
            return Err(Error::DimensionMismatch(format!(
                "denoiser with {channels} channels needs {} taps per layer",
                channels * TAPS
            )));
        }
        Ok(Self { channels, conv1, conv2 })
    }

    pub fn zeros(channels: usize) -> Self {
        Self {
            channels,
            conv1: vec![0.0; channels * TAPS],
            conv2: vec![0.0; channels * TAPS],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `conv2(relu(conv1(x)))` on a `rows x cols` image.
    pub fn apply(&self, x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        self.apply_with_hidden(x, rows, cols).0
    }

    /// Output together with the `C` pre-activation maps (concatenated).
    pub(crate) fn apply_with_hidden(&self, x: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
        let n = rows * cols;
        let mut hidden = vec![0.0; self.channels * n];
        let mut out = vec![0.0; n];
        let mut act = vec![0.0; n];
        for c in 0..self.channels {
            let h = &mut hidden[c * n..(c + 1) * n];
            conv3x3_acc(x, rows, cols, &self.conv1[c * TAPS..(c + 1) * TAPS], h);
            for (a, &v) in act.iter_mut().zip(h.iter()) {
                *a = v.max(0.0);
            }
            conv3x3_acc(&act, rows, cols, &self.conv2[c * TAPS..(c + 1) * TAPS], &mut out);
        }
        (out, hidden)
    }
}

/// Learnable residual 3x3 filter applied to the full reassembled image:
/// `x + gain * (kernel * x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeblockParams {
    pub kernel: [f64; TAPS],
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub block_size: usize,
    /// Measurements per block `M = round(ratio * B^2)`.
    pub ratio: f64,
    pub iterations: usize,
    pub channels: usize,
    pub trainable_a: bool,
    pub deblock: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            block_size: 16,
            ratio: 0.25,
            iterations: 6,
            channels: 8,
            trainable_a: false,
            deblock: false,
            seed: 0,
        }
    }
}

/// K unfolded iterations sharing one block sampling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedModel {
    pub(crate) block_size: usize,
    pub(crate) a: MeasurementMatrix,
    pub(crate) trainable_a: bool,
    pub(crate) theta: Vec<LearnedDenoiser>,
    pub(crate) deblock: Option<Vec<DeblockParams>>,
}

const CONV1_STD: f64 = 0.4714; // sqrt(2 / 9)
const CONV2_STD: f64 = 0.01;
const DEBLOCK_STD: f64 = 0.05;

impl UnfoldedModel {
    /// Builds a model from explicit parts. `K = theta.len()` may be zero, in
    /// which case the output is the back-projection `A^T y`.
    pub fn new(
        block_size: usize,
        a: MeasurementMatrix,
        trainable_a: bool,
        theta: Vec<LearnedDenoiser>,
        deblock: Option<Vec<DeblockParams>>,
    ) -> Result<Self> {
        if block_size == 0 || a.n() != block_size * block_size {
            return Err(Error::DimensionMismatch(format!(
                "matrix width {} does not match block size {block_size}",
                a.n()
            )));
        }
        if let Some(first) = theta.first() {
            if theta.iter().any(|t| t.channels() != first.channels()) {
                return Err(Error::DimensionMismatch("denoisers must share a channel count".into()));
            }
        }
        if let Some(d) = &deblock {
            if d.len() != theta.len() {
                return Err(Error::DimensionMismatch("one deblocker per iteration required".into()));
            }
        }
        let model = Self {
            block_size,
            a,
            trainable_a,
            theta,
            deblock,
        };
        if model.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        Ok(model)
    }

    /// Random initialisation: orthonormalised Gaussian `A`, He-scaled first
    /// layer, near-zero second layer, zero deblocking gains.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        if !(config.ratio > 0.0 && config.ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!("ratio {} outside (0, 1]", config.ratio)));
        }
        if config.channels == 0 {
            return Err(Error::InvalidArgument("channels must be >= 1".into()));
        }
        let n = config.block_size * config.block_size;
        let m = ((config.ratio * n as f64).round() as usize).clamp(1, n);
        let a = orthonormal_gaussian_matrix(m, n, config.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
        let n1 = Normal::new(0.0, CONV1_STD).expect("valid std");
        let n2 = Normal::new(0.0, CONV2_STD).expect("valid std");
        let c = config.channels;
        let theta = (0..config.iterations)
            .map(|_| {
                let conv1 = (0..c * TAPS).map(|_| n1.sample(&mut rng)).collect();
                let conv2 = (0..c * TAPS).map(|_| n2.sample(&mut rng)).collect();
                LearnedDenoiser {
                    channels: c,
                    conv1,
                    conv2,
                }
            })
            .collect();
        let deblock = config.deblock.then(|| {
            let nd = Normal::new(0.0, DEBLOCK_STD).expect("valid std");
            (0..config.iterations)
                .map(|_| {
                    let mut kernel = [0.0; TAPS];
                    kernel.iter_mut().for_each(|k| *k = nd.sample(&mut rng));
                    DeblockParams { kernel, gain: 0.0 }
                })
                .collect()
        });
        Self::new(config.block_size, a, config.trainable_a, theta, deblock)
    }

    pub fn iterations(&self) -> usize {
        self.theta.len()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Channel count of the learned denoisers (0 when `K = 0`).
    pub fn channels(&self) -> usize {
        self.theta.first().map_or(0, LearnedDenoiser::channels)
    }

    pub fn matrix(&self) -> &MeasurementMatrix {
        &self.a
    }

    pub fn trainable_a(&self) -> bool {
        self.trainable_a
    }

    pub fn set_trainable_a(&mut self, trainable: bool) {
        self.trainable_a = trainable;
    }

    pub fn denoisers(&self) -> &[LearnedDenoiser] {
        &self.theta
    }

    pub fn deblockers(&self) -> Option<&[DeblockParams]> {
        self.deblock.as_deref()
    }

    pub fn deblockers_mut(&mut self) -> Option<&mut [DeblockParams]> {
        self.deblock.as_deref_mut()
    }

    pub fn denoisers_mut(&mut self) -> &mut [LearnedDenoiser] {
        &mut self.theta
    }

    pub(crate) fn layout(&self) -> ParamLayout {
        ParamLayout {
            a_len: if self.trainable_a { self.a.m() * self.a.n() } else { 0 },
            channels: self.channels(),
            iterations: self.iterations(),
            deblock: self.deblock.is_some(),
        }
    }

    /// All parameters in checkpoint order: `A` row-major, then per iteration
    /// the first and second layer kernels, then per iteration the deblocking
    /// kernel followed by its gain.
    pub fn params(&self) -> Vec<f64> {
        let mut out = self.a.entries().to_vec();
        out.extend(self.non_matrix_params());
        out
    }

    fn non_matrix_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in &self.theta {
            out.extend_from_slice(&t.conv1);
            out.extend_from_slice(&t.conv2);
        }
        if let Some(d) = &self.deblock {
            for p in d {
                out.extend_from_slice(&p.kernel);
                out.push(p.gain);
            }
        }
        out
    }

    /// Trainable parameters only: like [`Self::params`] but without `A` when
    /// the matrix is frozen.
    pub fn trainable_params(&self) -> Vec<f64> {
        if self.trainable_a {
            self.params()
        } else {
            self.non_matrix_params()
        }
    }

    pub fn set_trainable_params(&mut self, values: &[f64]) -> Result<()> {
        let layout = self.layout();
        if values.len() != layout.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} trainable parameters, got {}",
                layout.len(),
                values.len()
            )));
        }
        if self.trainable_a {
            self.a.entries_mut().copy_from_slice(&values[..layout.a_len]);
        }
        self.set_non_matrix(&values[layout.a_len..]);
        Ok(())
    }

    pub(crate) fn set_all_params(&mut self, values: &[f64]) {
        let an = self.a.m() * self.a.n();
        self.a.entries_mut().copy_from_slice(&values[..an]);
        self.set_non_matrix(&values[an..]);
    }

    fn set_non_matrix(&mut self, values: &[f64]) {
        let ct = self.channels() * TAPS;
        let mut at = 0;
        for t in &mut self.theta {
            t.conv1.copy_from_slice(&values[at..at + ct]);
            t.conv2.copy_from_slice(&values[at + ct..at + 2 * ct]);
            at += 2 * ct;
        }
        if let Some(d) = &mut self.deblock {
            for p in d {
                p.kernel.copy_from_slice(&values[at..at + TAPS]);
                p.gain = values[at + TAPS];
                at += TAPS + 1;
            }
        }
    }
}

/// Offsets of each parameter group inside the flat trainable vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParamLayout {
    pub a_len: usize,
    pub channels: usize,
    pub iterations: usize,
    pub deblock: bool,
}

impl ParamLayout {
    pub fn conv1(&self, k: usize) -> usize {
        self.a_len + k * 2 * self.channels * TAPS
    }

    pub fn conv2(&self, k: usize) -> usize {
        self.conv1(k) + self.channels * TAPS
    }

    pub fn deblock_kernel(&self, k: usize) -> usize {
        self.a_len + self.iterations * 2 * self.channels * TAPS + k * (TAPS + 1)
    }

    pub fn deblock_gain(&self, k: usize) -> usize {
        self.deblock_kernel(k) + TAPS
    }

    pub fn len(&self) -> usize {
        self.a_len
            + self.iterations * 2 * self.channels * TAPS
            + if self.deblock { self.iterations * (TAPS + 1) } else { 0 }
    }
}
