//! Latent grids, the pluggable image-to-latent adapter, and the forward
//! noising step.

use crate::error::{Error, Result};
use crate::imageops::ImageBuffer;

use super::schedule::NoiseSchedule;

/// A channels x height x width real grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Latent {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn same_shape(&self, other: &Latent) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }
}

/// Maps images into latent space and back. The production system would put
/// a pretrained autoencoder here; the default is a pooling adapter.
pub trait LatentAdapter: Send + Sync {
    /// Spatial downscale factor between image and latent.
    fn factor(&self) -> usize;
    fn channels(&self) -> usize;
    fn encode(&self, img: &ImageBuffer) -> Result<Latent>;
    fn decode(&self, latent: &Latent) -> Result<ImageBuffer>;
}

/// Average-pool down, nearest-neighbor up, 3 channels.
#[derive(Debug, Clone)]
pub struct PoolAdapter {
    factor: usize,
}

impl PoolAdapter {
    pub fn new(factor: usize) -> Result<Self> {
        if factor == 0 || !factor.is_power_of_two() {
            return Err(Error::invalid(format!(
                "pool factor must be a positive power of two, got {factor}"
            )));
        }
        Ok(Self { factor })
    }
}

impl Default for PoolAdapter {
    fn default() -> Self {
        Self { factor: 2 }
    }
}

impl LatentAdapter for PoolAdapter {
    fn factor(&self) -> usize {
        self.factor
    }

    fn channels(&self) -> usize {
        3
    }

    fn encode(&self, img: &ImageBuffer) -> Result<Latent> {
        if img.channels() != 3 {
            return Err(Error::invalid("latent adapter expects a 3-channel image"));
        }
        if img.width() % self.factor != 0 || img.height() % self.factor != 0 {
            return Err(Error::invalid(format!(
                "image {}x{} not divisible by latent factor {}",
                img.width(),
                img.height(),
                self.factor
            )));
        }
        let (lw, lh) = (img.width() / self.factor, img.height() / self.factor);
        let mut out = Latent::zeros(3, lh, lw);
        let norm = (self.factor * self.factor) as f64;
        for c in 0..3 {
            for y in 0..lh {
                for x in 0..lw {
                    let mut acc = 0.0;
                    for dy in 0..self.factor {
                        for dx in 0..self.factor {
                            acc += img.get(x * self.factor + dx, y * self.factor + dy, c);
                        }
                    }
                    out.data[(c * lh + y) * lw + x] = acc / norm;
                }
            }
        }
        Ok(out)
    }

    fn decode(&self, latent: &Latent) -> Result<ImageBuffer> {
        if latent.channels != 3 {
            return Err(Error::invalid("latent adapter expects 3 latent channels"));
        }
        let (w, h) = (latent.width * self.factor, latent.height * self.factor);
        let mut img = ImageBuffer::new(w, h, 3);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let v = latent.data
                        [(c * latent.height + y / self.factor) * latent.width + x / self.factor];
                    img.set(x, y, c, v.clamp(0.0, 1.0));
                }
            }
        }
        Ok(img)
    }
}

/// Forward noising: `alpha_t * x + sigma_t * eps` elementwise.
pub fn add_noise(x: &Latent, eps: &Latent, t: usize, sched: &NoiseSchedule) -> Result<Latent> {
    if !x.same_shape(eps) {
        return Err(Error::invalid(format!(
            "latent {}x{}x{} and noise {}x{}x{} shapes differ",
            x.channels, x.height, x.width, eps.channels, eps.height, eps.width
        )));
    }
    sched.check_step(t)?;
    let (a, s) = (sched.alpha(t), sched.sigma(t));
    let data = x
        .data
        .iter()
        .zip(&eps.data)
        .map(|(xv, ev)| a * xv + s * ev)
        .collect();
    Ok(Latent {
        channels: x.channels,
        height: x.height,
        width: x.width,
        data,
    })
}
