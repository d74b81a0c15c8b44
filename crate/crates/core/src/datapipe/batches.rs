//! Seeded batch iteration over a manifest: shuffle per epoch, load pairs,
//! attach per-item timesteps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{mask_path_for, Manifest, ManifestEntry};
use super::pairs::{
    make_image_pair, sample_video_pair, standardize_pair, ClipFrame, PairConfig, StandardizeConfig,
};
use super::timestep::{sample_timestep, TimestepSamplerConfig};
use super::Modality;
use crate::datapipe::TrainingPair;
use crate::error::{Error, Result};
use crate::imageops::{load_image, load_mask};

#[derive(Debug, Clone)]
pub struct BatchItem {
    pub pair: TrainingPair,
    pub timestep: usize,
}

pub type Batch = Vec<BatchItem>;

#[derive(Debug, Clone, Default)]
pub struct LoaderConfig {
    pub pair: PairConfig,
    pub timesteps: TimestepSamplerConfig,
    /// When set, pairs are re-expressed at the model resolution.
    pub standardize: Option<StandardizeConfig>,
}

/// Infinite stream of batches. Each epoch reshuffles the manifest with the
/// stream's seeded generator and visits every entry exactly once; the last
/// batch of an epoch may be short.
pub struct BatchStream<'a> {
    manifest: &'a Manifest,
    batch_size: usize,
    cfg: LoaderConfig,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

/// Validates inputs and opens a batch stream seeded with `seed`.
pub fn iterate_batches(
    manifest: &Manifest,
    batch_size: usize,
    cfg: LoaderConfig,
    seed: u64,
) -> Result<BatchStream<'_>> {
    if manifest.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch_size < 1 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    cfg.timesteps.validate()?;
    Ok(BatchStream {
        manifest,
        batch_size,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed),
        order: Vec::new(),
        cursor: 0,
    })
}

impl BatchStream<'_> {
    pub fn next_batch(&mut self) -> Result<Batch> {
        if self.cursor >= self.order.len() {
            self.order = (0..self.manifest.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let mut batch = Vec::with_capacity(end - self.cursor);
        for k in self.cursor..end {
            let entry = &self.manifest.entries[self.order[k]];
            let pair = load_pair(entry, &self.cfg, &mut self.rng)?;
            let timestep = sample_timestep(pair.modality, &self.cfg.timesteps, &mut self.rng);
            batch.push(BatchItem { pair, timestep });
        }
        self.cursor = end;
        Ok(batch)
    }
}

impl Iterator for BatchStream<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_batch())
    }
}

fn load_pair(
    entry: &ManifestEntry,
    cfg: &LoaderConfig,
    rng: &mut impl Rng,
) -> Result<TrainingPair> {
    let pair = match entry.modality {
        Modality::Video => {
            let mut clip = Vec::with_capacity(entry.paths.len());
            for img_path in &entry.paths {
                let image = load_image(img_path)?;
                let mask = load_mask(&mask_path_for(img_path))?;
                clip.push(ClipFrame {
                    image,
                    masks: [(entry.instance_id.clone(), mask)].into_iter().collect(),
                });
            }
            sample_video_pair(&clip, &entry.instance_id, &cfg.pair, rng)?
        }
        Modality::Image => {
            let image = load_image(&entry.paths[0])?;
            let mask = load_mask(&mask_path_for(&entry.paths[0]))?;
            make_image_pair(&image, &mask, &cfg.pair, rng)?
        }
    };
    match &cfg.standardize {
        Some(std_cfg) => standardize_pair(&pair, std_cfg),
        None => Ok(pair),
    }
}
