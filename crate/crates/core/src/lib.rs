//! Desk-scale object teleportation: regenerate a box-marked region of a
//! scene image so that it contains a given target object.
//!
//! The pipeline conditions a small latent denoiser on two complementary
//! object descriptions: identity tokens from a patch-token vision backbone
//! and a high-frequency detail map stitched into the scene at the target
//! location. Training pairs come from video clips (same instance, two
//! frames) and augmented single images, with modality-dependent timestep
//! sampling.

pub mod collage;
pub mod datapipe;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod idextract;
pub mod imageops;
pub mod inference;

pub use error::{Error, Result};
