//! Incomplete multi-view clustering via latent diffusion completion.
//!
//! The pipeline runs in three stages:
//!
//! 1. per-view autoencoders are fit with a mask-weighted reconstruction loss
//!    and produce latent representations for the observed views;
//! 2. a pair of conditional denoising diffusion models (one per completion
//!    direction) learns to generate one view's latent from the other's, and
//!    is then used to impute every missing latent by ancestral sampling;
//! 3. view-specific and shared projection heads are trained with a spectral
//!    contrastive loss plus a cluster-level contrastive loss with an entropy
//!    penalty, and the per-view soft assignments are summed for the final
//!    prediction.
//!
//! Everything is built on the small reverse-mode autodiff engine in [`nn`].
//! Data-parallel inner loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise. Results are
//! bit-identical in both modes.

pub mod autoencoder;
pub mod contrastive;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
