//! Training-pair production: video frame pairs, augmented single images,
//! dataset manifests, batch iteration, and the modality-biased timestep
//! sampler.
//!
//! All randomness flows through explicitly passed seeded generators; the
//! pipeline replays bit-exactly from a seed.

mod batches;
mod manifest;
mod pairs;
mod timestep;

pub use batches::{iterate_batches, Batch, BatchItem, BatchStream, LoaderConfig};
pub use manifest::{build_manifest, mask_path_for, Manifest, ManifestEntry};
pub use pairs::{
    make_image_pair, sample_video_pair, standardize_pair, AugmentConfig, ClipFrame, PairConfig,
    StandardizeConfig, TrainingPair,
};
pub use timestep::{sample_timestep, TimestepSamplerConfig};

use serde::{Deserialize, Serialize};

/// Where a training pair came from: a video clip or a single image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Image,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modality::Video => write!(f, "video"),
            Modality::Image => write!(f, "image"),
        }
    }
}
