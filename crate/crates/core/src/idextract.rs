//! Identity tokens: a pluggable vision backbone turns a background-removed
//! object crop into one global token plus patch tokens; a single affine
//! projector maps their concatenation into the denoiser's cross-attention
//! width.
//!
//! The default backbone is a deterministic toy (per-patch channel means
//! through a fixed seeded mixing matrix) so the full pipeline runs without
//! external weights. Reference-scale backbones (224-pixel input, 14-pixel
//! patches, 1536-wide features projected to 1024) plug in behind the same
//! trait.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::imageops::{resize_bilinear, ImageBuffer};

/// Raw backbone features: one global token and `N_p` patch tokens, all of
/// width `feature_dim`.
#[derive(Debug, Clone)]
pub struct BackboneOutput {
    pub global_token: Array2<f64>,
    pub patch_tokens: Array2<f64>,
}

impl BackboneOutput {
    pub fn feature_dim(&self) -> usize {
        self.global_token.ncols()
    }

    pub fn patch_count(&self) -> usize {
        self.patch_tokens.nrows()
    }

    /// Global token stacked above the patch tokens: `(N_p + 1) x D_b`.
    pub fn stacked(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.patch_count() + 1, self.feature_dim()));
        out.row_mut(0).assign(&self.global_token.row(0));
        for (i, row) in self.patch_tokens.rows().into_iter().enumerate() {
            out.row_mut(i + 1).assign(&row);
        }
        out
    }
}

/// A vision encoder producing global + patch tokens from a square image.
pub trait Backbone: Send + Sync {
    fn input_side(&self) -> usize;
    fn patch_size(&self) -> usize;
    fn feature_dim(&self) -> usize;
    /// `img` is square with side `input_side`; deterministic given weights.
    fn encode(&self, img: &ImageBuffer) -> BackboneOutput;
}

/// Deterministic toy backbone: non-overlapping patches, per-patch channel
/// means, and a fixed seeded mixing matrix shared by all patches. Constant
/// images therefore produce identical patch tokens, and permuting input
/// patches permutes patch tokens identically.
#[derive(Debug, Clone)]
pub struct ToyBackbone {
    input_side: usize,
    patch_size: usize,
    /// 3 x D_b patch mixing matrix.
    patch_mix: Array2<f64>,
    /// 3 x D_b global mixing matrix.
    global_mix: Array2<f64>,
}

impl ToyBackbone {
    pub fn new(input_side: usize, patch_size: usize, feature_dim: usize, seed: u64) -> Result<Self> {
        if input_side == 0 || patch_size == 0 || input_side % patch_size != 0 {
            return Err(Error::invalid(format!(
                "input side {input_side} must be a positive multiple of patch size {patch_size}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize| -> Array2<f64> {
            Array2::from_shape_fn((rows, cols), |_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v / (rows as f64).sqrt()
            })
        };
        Ok(Self {
            input_side,
            patch_size,
            patch_mix: draw(3, feature_dim),
            global_mix: draw(3, feature_dim),
        })
    }

    /// Rebuilds from explicit mixing matrices (used by checkpoint loading).
    pub fn from_matrices(
        input_side: usize,
        patch_size: usize,
        patch_mix: Array2<f64>,
        global_mix: Array2<f64>,
    ) -> Result<Self> {
        if patch_mix.nrows() != 3 || global_mix.nrows() != 3 {
            return Err(Error::invalid("mixing matrices must have 3 rows"));
        }
        if patch_mix.ncols() != global_mix.ncols() {
            return Err(Error::invalid("mixing matrices must share their width"));
        }
        if input_side == 0 || patch_size == 0 || input_side % patch_size != 0 {
            return Err(Error::invalid("input side must be a positive multiple of patch size"));
        }
        Ok(Self {
            input_side,
            patch_size,
            patch_mix,
            global_mix,
        })
    }

    pub fn patch_mix(&self) -> &Array2<f64> {
        &self.patch_mix
    }

    pub fn global_mix(&self) -> &Array2<f64> {
        &self.global_mix
    }

    fn channel_means(img: &ImageBuffer, x0: usize, y0: usize, side: usize) -> [f64; 3] {
        let mut sums = [0.0; 3];
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                for (c, sum) in sums.iter_mut().enumerate() {
                    *sum += if img.channels() == 3 {
                        img.get(x, y, c)
                    } else {
                        img.get(x, y, 0)
                    };
                }
            }
        }
        let n = (side * side) as f64;
        [sums[0] / n, sums[1] / n, sums[2] / n]
    }
}

impl Backbone for ToyBackbone {
    fn input_side(&self) -> usize {
        self.input_side
    }

    fn patch_size(&self) -> usize {
        self.patch_size
    }

    fn feature_dim(&self) -> usize {
        self.patch_mix.ncols()
    }

    fn encode(&self, img: &ImageBuffer) -> BackboneOutput {
        let grid = self.input_side / self.patch_size;
        let dim = self.feature_dim();
        let mix = |stats: [f64; 3], m: &Array2<f64>| -> Array1<f64> {
            let mut out = Array1::zeros(dim);
            for (c, s) in stats.iter().enumerate() {
                for d in 0..dim {
                    out[d] += s * m[(c, d)];
                }
            }
            out
        };

        let mut patches = Array2::zeros((grid * grid, dim));
        for gy in 0..grid {
            for gx in 0..grid {
                let stats =
                    Self::channel_means(img, gx * self.patch_size, gy * self.patch_size, self.patch_size);
                patches
                    .row_mut(gy * grid + gx)
                    .assign(&mix(stats, &self.patch_mix));
            }
        }
        let global_stats = Self::channel_means(img, 0, 0, self.input_side);
        let mut global = Array2::zeros((1, dim));
        global.row_mut(0).assign(&mix(global_stats, &self.global_mix));

        BackboneOutput {
            global_token: global,
            patch_tokens: patches,
        }
    }
}

/// Runs the backbone on a square object crop, resizing (bilinear) to the
/// backbone's native side when necessary. Non-square inputs are rejected.
pub fn extract_tokens(object_img: &ImageBuffer, backbone: &dyn Backbone) -> Result<BackboneOutput> {
    if object_img.width() != object_img.height() {
        return Err(Error::invalid(format!(
            "object crop must be square, got {}x{}",
            object_img.width(),
            object_img.height()
        )));
    }
    let side = backbone.input_side();
    let resized;
    let img = if object_img.width() == side {
        object_img
    } else {
        resized = resize_bilinear(object_img, side, side);
        &resized
    };
    Ok(backbone.encode(img))
}

/// The single affine map taking backbone features to the denoiser's
/// cross-attention width.
#[derive(Debug, Clone)]
pub struct IdProjector {
    /// `D_b x D_c`.
    pub weight: Array2<f64>,
    /// Length `D_c`.
    pub bias: Array1<f64>,
}

impl IdProjector {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weight.ncols() != bias.len() {
            return Err(Error::invalid(format!(
                "projector weight width {} does not match bias length {}",
                weight.ncols(),
                bias.len()
            )));
        }
        Ok(Self { weight, bias })
    }
}

/// The `(N_p + 1) x D_c` conditioning matrix. Row 0 is the projected global
/// token; rows 1.. preserve patch order.
#[derive(Debug, Clone)]
pub struct IdTokens {
    pub tokens: Array2<f64>,
}

impl IdTokens {
    pub fn rows(&self) -> usize {
        self.tokens.nrows()
    }

    pub fn width(&self) -> usize {
        self.tokens.ncols()
    }
}

/// Concatenates the global token above the patch tokens and applies the
/// affine projector row-wise.
pub fn project_id_tokens(out: &BackboneOutput, proj: &IdProjector) -> Result<IdTokens> {
    if out.feature_dim() != proj.weight.nrows() {
        return Err(Error::invalid(format!(
            "backbone width {} does not match projector input width {}",
            out.feature_dim(),
            proj.weight.nrows()
        )));
    }
    let stacked = out.stacked();
    let mut tokens = stacked.dot(&proj.weight);
    for mut row in tokens.rows_mut() {
        row += &proj.bias;
    }
    Ok(IdTokens { tokens })
}
