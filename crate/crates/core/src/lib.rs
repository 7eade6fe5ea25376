//! Compressive-sensing reconstruction toolkit for quantitative acoustic
//! microscopy (QAM) parametric maps.
//!
//! - [`map`], [`blocks`], [`io`]: grids, block partitioning and the QAMP file format
//! - [`sampling`]: Gaussian block matrices, binary masks and the forward model
//! - [`amp`]: approximate message passing with pluggable denoisers
//! - [`unfolded`]: deep-unfolded AMP with trainable denoisers, sampling matrix and deblocker
//! - [`qamsim`]: two-reflection echo simulation, phantoms and speed-of-sound estimation
//! - [`metrics`]: PSNR, RMSE and SSIM

// `!(x >= 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod blocks;
pub mod error;
pub mod io;
pub mod map;
pub mod metrics;
pub mod qamsim;
pub mod sampling;
pub mod unfolded;

pub use error::{Error, Result};
pub use map::ParametricMap;
