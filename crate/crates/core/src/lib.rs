//! Unsupervised hybrid light-field spatial super-resolution.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense tensors, reverse-mode autodiff, Adam and checkpoints.
//! * [`lightfield`]: the 4D light-field container and its structural transforms.
//! * [`datagen`]: synthetic hybrid scenes, dataset I/O and calibration fits.
//! * [`networks`]: the central-view synthesis, backward degradation and
//!   hybrid super-resolution networks.
//! * [`training`]: losses and the three training stages.
//! * [`metrics`]: PSNR, SSIM, EPI-SSIM and per-view reports.
//! * [`resample`]: bicubic resizing.
//! * [`pipeline`]: dataset-level stage runs, evaluation and the ablation matrix.
//! * [`config`]: the run configuration file.

pub mod config;
pub mod datagen;
pub mod error;
pub mod lightfield;
pub mod metrics;
pub mod networks;
pub mod pipeline;
pub mod resample;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Element, Tensor, Var};
