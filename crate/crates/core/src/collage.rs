//! Conditioning collage: the scene with the target box hollowed out and the
//! object's high-frequency map stitched in, plus a shape-mask channel.
//! Also simulates the coarse user-drawn shape masks used during training.

use rand::Rng;

use crate::error::{Error, Result};
use crate::imageops::{
    dilate_mask, erode_mask, hollow_box, resize_nearest, resize_nearest_mask, BinaryMask,
    BoundingBox, ImageBuffer,
};

/// The 4-channel detail-extractor input: RGB collage plus shape channel.
///
/// Outside the box the RGB channels equal the source scene exactly and the
/// shape channel is zero.
#[derive(Debug, Clone)]
pub struct CollageInput {
    pub rgb: ImageBuffer,
    pub shape: BinaryMask,
}

impl CollageInput {
    pub fn width(&self) -> usize {
        self.rgb.width()
    }

    pub fn height(&self) -> usize {
        self.rgb.height()
    }
}

/// Controls for the shape-mask simulator.
#[derive(Debug, Clone)]
pub struct ShapeSimConfig {
    /// Probability of returning the filled bounding box instead of a
    /// degraded silhouette.
    pub box_probability: f64,
    /// Downsample ratios the silhouette branch draws from.
    pub downsample_ratios: Vec<f64>,
    /// Upper bound on the number of random dilate/erode steps.
    pub morph_iters_max: usize,
}

impl Default for ShapeSimConfig {
    fn default() -> Self {
        Self {
            box_probability: 0.3,
            downsample_ratios: vec![0.5, 0.25, 0.125, 0.0625],
            morph_iters_max: 5,
        }
    }
}

impl ShapeSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.box_probability) {
            return Err(Error::invalid(format!(
                "box_probability {} outside [0, 1]",
                self.box_probability
            )));
        }
        if self.downsample_ratios.is_empty() {
            return Err(Error::invalid("downsample_ratios must not be empty"));
        }
        if self
            .downsample_ratios
            .iter()
            .any(|r| !(r.is_finite() && *r > 0.0 && *r <= 1.0))
        {
            return Err(Error::invalid("downsample ratios must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Identity configuration: silhouette branch always taken, no
    /// degradation. Useful for tests and deterministic pipelines.
    pub fn identity() -> Self {
        Self {
            box_probability: 0.0,
            downsample_ratios: vec![1.0],
            morph_iters_max: 0,
        }
    }
}

/// Simulates a coarse user-drawn shape mask from a ground-truth instance
/// mask: either the filled bounding box (with `box_probability`) or the
/// mask downsampled, upsampled back, and randomly dilated/eroded.
///
/// The output is never empty and always intersects the bounding box of
/// `gt_mask`; degenerate draws fall back to the filled bounding box.
pub fn simulate_shape_mask(
    gt_mask: &BinaryMask,
    cfg: &ShapeSimConfig,
    rng: &mut impl Rng,
) -> Result<BinaryMask> {
    cfg.validate()?;
    let bbox = gt_mask
        .bounding_box()
        .ok_or_else(|| Error::EmptyMask("simulate_shape_mask needs a non-empty mask".into()))?;

    if rng.random::<f64>() < cfg.box_probability {
        return Ok(filled_box_mask(gt_mask.width(), gt_mask.height(), &bbox));
    }

    let ratio = cfg.downsample_ratios[rng.random_range(0..cfg.downsample_ratios.len())];
    let dw = ((gt_mask.width() as f64 * ratio).round() as usize).max(1);
    let dh = ((gt_mask.height() as f64 * ratio).round() as usize).max(1);
    let small = resize_nearest_mask(gt_mask, dw, dh);
    let mut mask = resize_nearest_mask(&small, gt_mask.width(), gt_mask.height());

    let steps = rng.random_range(0..=cfg.morph_iters_max);
    for _ in 0..steps {
        mask = if rng.random_bool(0.5) {
            dilate_mask(&mask, 1)
        } else {
            erode_mask(&mask, 1)
        };
    }

    if mask.is_empty() || !intersects(&mask, &bbox) {
        return Ok(filled_box_mask(gt_mask.width(), gt_mask.height(), &bbox));
    }
    Ok(mask)
}

fn filled_box_mask(w: usize, h: usize, bbox: &BoundingBox) -> BinaryMask {
    let mut m = BinaryMask::new(w, h);
    for y in bbox.y0()..bbox.y1() {
        for x in bbox.x0()..bbox.x1() {
            m.set(x, y, 1);
        }
    }
    m
}

fn intersects(mask: &BinaryMask, bbox: &BoundingBox) -> bool {
    for y in bbox.y0()..bbox.y1() {
        for x in bbox.x0()..bbox.x1() {
            if mask.get(x, y) == 1 {
                return true;
            }
        }
    }
    false
}

/// Stitches the object's high-frequency map into the hollowed box region of
/// the scene and builds the box-local shape channel.
///
/// The box interior is zeroed first, then `object_hf` is resized (nearest
/// neighbor) to the box and written where the resized `object_mask` is set.
/// Pixels outside the box are bit-equal to the scene.
pub fn build_collage(
    scene: &ImageBuffer,
    bbox: &BoundingBox,
    object_hf: &ImageBuffer,
    object_mask: &BinaryMask,
    shape_mask: &BinaryMask,
) -> Result<CollageInput> {
    if scene.channels() != 3 {
        return Err(Error::invalid("scene must have 3 channels"));
    }
    if !bbox.fits_within(scene.width(), scene.height()) {
        return Err(Error::invalid(format!(
            "box {bbox:?} exceeds scene {}x{}",
            scene.width(),
            scene.height()
        )));
    }
    if object_hf.width() != object_mask.width() || object_hf.height() != object_mask.height() {
        return Err(Error::invalid(format!(
            "object_hf {}x{} and object_mask {}x{} dimensions differ",
            object_hf.width(),
            object_hf.height(),
            object_mask.width(),
            object_mask.height()
        )));
    }

    let (bw, bh) = (bbox.width(), bbox.height());
    let mut rgb = scene.clone();
    hollow_box(&mut rgb, bbox);

    let hf = resize_nearest(object_hf, bw, bh);
    let hf_mask = resize_nearest_mask(object_mask, bw, bh);
    for y in 0..bh {
        for x in 0..bw {
            if hf_mask.get(x, y) == 1 {
                for c in 0..3 {
                    rgb.set(bbox.x0() + x, bbox.y0() + y, c, hf.get(x, y, c));
                }
            }
        }
    }

    let shape_in_box = resize_nearest_mask(shape_mask, bw, bh);
    let mut shape = BinaryMask::new(scene.width(), scene.height());
    for y in 0..bh {
        for x in 0..bw {
            shape.set(bbox.x0() + x, bbox.y0() + y, shape_in_box.get(x, y));
        }
    }

    Ok(CollageInput { rgb, shape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ring_mask_16() -> BinaryMask {
        // Solid 12x12 frame with a 6x6 hole: never equal to its filled
        // bounding box, so the box branch is distinguishable.
        let mut m = BinaryMask::new(16, 16);
        for y in 2..14 {
            for x in 2..14 {
                if !(5..11).contains(&x) || !(5..11).contains(&y) {
                    m.set(x, y, 1);
                }
            }
        }
        m
    }

    #[test]
    fn box_branch_returns_filled_bbox() {
        let gt = ring_mask_16();
        let cfg = ShapeSimConfig {
            box_probability: 1.0,
            ..ShapeSimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = simulate_shape_mask(&gt, &cfg, &mut rng).unwrap();
        let bbox = gt.bounding_box().unwrap();
        assert_eq!(out, filled_box_mask(16, 16, &bbox));
    }

    #[test]
    fn identity_configuration_reproduces_input() {
        let gt = ring_mask_16();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = simulate_shape_mask(&gt, &ShapeSimConfig::identity(), &mut rng).unwrap();
        assert_eq!(out, gt);
    }

    #[test]
    fn box_branch_frequency_matches_probability() {
        // Monte Carlo over the seeded generator; with the identity
        // silhouette branch the filled box can only come from the box
        // branch, so counting equality measures the branch frequency.
        let gt = ring_mask_16();
        let bbox_mask = filled_box_mask(16, 16, &gt.bounding_box().unwrap());
        let cfg = ShapeSimConfig {
            box_probability: 0.3,
            downsample_ratios: vec![1.0],
            morph_iters_max: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let mut hits = 0;
        for _ in 0..n {
            if simulate_shape_mask(&gt, &cfg, &mut rng).unwrap() == bbox_mask {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.3).abs() <= 0.02, "box branch frequency {freq}");
    }

    #[test]
    fn same_seed_same_mask() {
        let gt = ring_mask_16();
        let cfg = ShapeSimConfig::default();
        let a = simulate_shape_mask(&gt, &cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = simulate_shape_mask(&gt, &cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn collage_preserves_scene_outside_box() {
        let scene = ImageBuffer::from_fn(12, 10, 3, |x, y, c| ((x * 3 + y * 5 + c) % 11) as f64 / 11.0);
        let bbox = BoundingBox::new(3, 2, 9, 7).unwrap();
        let hf = ImageBuffer::from_fn(4, 4, 3, |x, y, _| ((x + y) % 2) as f64);
        let omask = BinaryMask::filled(4, 4);
        let shape = BinaryMask::filled(4, 4);
        let collage = build_collage(&scene, &bbox, &hf, &omask, &shape).unwrap();
        for y in 0..10 {
            for x in 0..12 {
                if !bbox.contains(x, y) {
                    for c in 0..3 {
                        assert_eq!(collage.rgb.get(x, y, c), scene.get(x, y, c));
                    }
                    assert_eq!(collage.shape.get(x, y), 0);
                }
            }
        }
    }

    #[test]
    fn zero_hf_map_leaves_box_interior_black() {
        let scene = ImageBuffer::from_fn(8, 8, 3, |_, _, _| 0.5);
        let bbox = BoundingBox::new(2, 2, 6, 6).unwrap();
        let hf = ImageBuffer::new(4, 4, 3);
        let omask = BinaryMask::filled(4, 4);
        let shape = BinaryMask::filled(4, 4);
        let collage = build_collage(&scene, &bbox, &hf, &omask, &shape).unwrap();
        for y in 2..6 {
            for x in 2..6 {
                for c in 0..3 {
                    assert_eq!(collage.rgb.get(x, y, c), 0.0);
                }
                assert_eq!(collage.shape.get(x, y), 1);
            }
        }
    }

    #[test]
    fn two_by_two_patch_into_four_box_replicates() {
        // Nearest-neighbor resize oracle: each source pixel covers a 2x2
        // block of the box.
        let scene = ImageBuffer::new(6, 6, 3);
        let bbox = BoundingBox::new(1, 1, 5, 5).unwrap();
        let hf = ImageBuffer::from_fn(2, 2, 3, |x, y, _| (y * 2 + x) as f64 / 4.0);
        let omask = BinaryMask::filled(2, 2);
        let shape = BinaryMask::filled(2, 2);
        let collage = build_collage(&scene, &bbox, &hf, &omask, &shape).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(
                    collage.rgb.get(1 + x, 1 + y, 0),
                    hf.get(x / 2, y / 2, 0),
                    "at ({x},{y})"
                );
            }
        }
    }

    #[test]
    fn out_of_frame_box_rejected() {
        let scene = ImageBuffer::new(8, 8, 3);
        let bbox = BoundingBox::new(4, 4, 10, 6).unwrap();
        let hf = ImageBuffer::new(2, 2, 3);
        let m = BinaryMask::filled(2, 2);
        assert!(build_collage(&scene, &bbox, &hf, &m, &m).is_err());
    }

    fn arb_mask_nonempty() -> impl Strategy<Value = BinaryMask> {
        prop::collection::vec(0u8..=1, 64).prop_map(|mut v| {
            if v.iter().all(|&b| b == 0) {
                v[27] = 1;
            }
            BinaryMask::from_vec(8, 8, v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn simulated_masks_are_never_empty_and_touch_the_bbox(
            mask in arb_mask_nonempty(),
            seed in 0u64..1000,
            morph in 0usize..6,
        ) {
            let cfg = ShapeSimConfig {
                box_probability: 0.3,
                downsample_ratios: vec![0.5, 0.25],
                morph_iters_max: morph,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = simulate_shape_mask(&mask, &cfg, &mut rng).unwrap();
            prop_assert!(!out.is_empty());
            let bbox = mask.bounding_box().unwrap();
            prop_assert!(intersects(&out, &bbox));
        }

        #[test]
        fn collage_outside_box_is_bit_exact(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scene = ImageBuffer::from_fn(10, 10, 3, |_, _, _| rng.random::<f64>());
            let bbox = BoundingBox::new(2, 3, 7, 9).unwrap();
            let hf = ImageBuffer::from_fn(3, 3, 3, |_, _, _| rng.random::<f64>());
            let omask = BinaryMask::filled(3, 3);
            let collage = build_collage(&scene, &bbox, &hf, &omask, &omask).unwrap();
            for y in 0..10 {
                for x in 0..10 {
                    if !bbox.contains(x, y) {
                        for c in 0..3 {
                            prop_assert_eq!(collage.rgb.get(x, y, c), scene.get(x, y, c));
                        }
                        prop_assert_eq!(collage.shape.get(x, y), 0);
                    }
                }
            }
        }
    }
}
