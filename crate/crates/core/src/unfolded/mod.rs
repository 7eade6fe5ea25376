//! Deep-unfolded AMP: a fixed number of block AMP iterations whose correction
//! term is produced by a small trainable convolutional network, with an
//! optionally trainable sampling matrix and per-iteration deblocking filter.

pub mod checkpoint;
pub mod conv;
mod forward;
mod model;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use forward::{deblock, forward_with_correction, reconstruct, sample_blocks, unfolded_forward, CorrectionFn};
pub use model::{DeblockParams, LearnedDenoiser, ModelConfig, UnfoldedModel};
pub use train::{
    batch_loss, finite_difference_check, gradient_check, loss_and_gradient, loss_curve_csv, train_model, Adam,
    LossRecord, TrainConfig, TrainReport,
};

use crate::map::ParametricMap;

/// `conv2(relu(conv1(X)))` on a square block.
pub fn learned_denoiser_apply(block: &ParametricMap, theta: &LearnedDenoiser) -> crate::Result<ParametricMap> {
    let (r, c) = block.shape();
    ParametricMap::new(r, c, theta.apply(block.data(), r, c), block.unit())
}
