//! Adaptive timestep sampling: video pairs are biased toward the early
//! (structural) half of the diffusion range, single images toward the late
//! (detail) half.

use rand::Rng;

use super::Modality;
use crate::error::{Error, Result};

/// Piecewise-uniform timestep distribution over `[0, total_steps)` split at
/// `boundary`. The favored half receives probability mass
/// `0.5 * (1 + early_boost)`, i.e. 0.75 with the default boost of 0.5.
#[derive(Debug, Clone)]
pub struct TimestepSamplerConfig {
    pub total_steps: usize,
    pub early_boost: f64,
    pub boundary: usize,
}

impl Default for TimestepSamplerConfig {
    fn default() -> Self {
        Self {
            total_steps: 1000,
            early_boost: 0.5,
            boundary: 500,
        }
    }
}

impl TimestepSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.boundary == 0 || self.boundary >= self.total_steps {
            return Err(Error::invalid(format!(
                "boundary {} must satisfy 0 < boundary < total_steps ({})",
                self.boundary, self.total_steps
            )));
        }
        if !(self.early_boost.is_finite() && self.early_boost >= 0.0) {
            return Err(Error::invalid(format!(
                "early_boost must be finite and >= 0, got {}",
                self.early_boost
            )));
        }
        Ok(())
    }

    fn favored_mass(&self) -> f64 {
        (0.5 * (1.0 + self.early_boost)).min(1.0)
    }
}

/// Draws a training timestep in `[0, total_steps)`.
///
/// For video the favored half is `[boundary, total_steps)` (the high-noise,
/// structure-forming steps); for images it is `[0, boundary)`. Sampling is
/// uniform inside each half.
pub fn sample_timestep(
    modality: Modality,
    cfg: &TimestepSamplerConfig,
    rng: &mut impl Rng,
) -> usize {
    debug_assert!(cfg.validate().is_ok(), "timestep sampler config invalid");
    let favored = rng.random::<f64>() < cfg.favored_mass();
    let late = matches!(modality, Modality::Video) == favored;
    if late {
        rng.random_range(cfg.boundary..cfg.total_steps)
    } else {
        rng.random_range(0..cfg.boundary)
    }
}
