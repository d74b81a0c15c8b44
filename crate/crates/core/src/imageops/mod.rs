//! Deterministic raster kernels: grayscale conversion, Sobel high-pass
//! filtering, morphological erosion, masked Hadamard products, and the
//! crop/resize helpers the rest of the pipeline is built on.
//!
//! All operations are pure functions on immutable inputs. Intensities live
//! in [0, 1]; file I/O maps 8-bit 0-255 to that range and back.

mod buffer;
mod filters;
mod io;
mod resize;

pub use buffer::{BinaryMask, BoundingBox, ImageBuffer};
pub use filters::{
    dilate_mask, erode_mask, high_frequency_map, sobel_response, to_grayscale, SobelKernels,
};
pub use io::{load_image, load_mask, save_image, save_mask};
pub use resize::{resize_bilinear, resize_nearest, resize_nearest_mask};

use crate::error::{Error, Result};

/// Crops a square region centered on the mask's bounding box and zeroes
/// every background pixel (mask = 0) inside the crop.
///
/// The square side is `(1 + pad_fraction) * max(bbox width, bbox height)`,
/// clamped to fit the frame; the square is shifted inward when it would
/// otherwise leave the frame.
pub fn center_crop_object(
    img: &ImageBuffer,
    mask: &BinaryMask,
    pad_fraction: f64,
) -> Result<(ImageBuffer, BinaryMask)> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(Error::invalid(format!(
            "image {}x{} and mask {}x{} dimensions differ",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    if !(pad_fraction.is_finite() && pad_fraction >= 0.0) {
        return Err(Error::invalid(format!(
            "pad_fraction must be finite and >= 0, got {pad_fraction}"
        )));
    }
    let bbox = mask
        .bounding_box()
        .ok_or_else(|| Error::EmptyMask("center_crop_object needs a non-empty mask".into()))?;

    let max_dim = bbox.width().max(bbox.height());
    let mut side = ((1.0 + pad_fraction) * max_dim as f64).round() as usize;
    side = side.max(1).min(img.width().min(img.height()));

    let (cx, cy) = bbox.center();
    let x0 = shift_into_frame(cx, side, img.width());
    let y0 = shift_into_frame(cy, side, img.height());

    let mut crop = ImageBuffer::new(side, side, img.channels());
    let mut crop_mask = BinaryMask::new(side, side);
    for y in 0..side {
        for x in 0..side {
            let m = mask.get(x0 + x, y0 + y);
            crop_mask.set(x, y, m);
            if m == 1 {
                for c in 0..img.channels() {
                    crop.set(x, y, c, img.get(x0 + x, y0 + y, c));
                }
            }
        }
    }
    Ok((crop, crop_mask))
}

/// Expands a box to an axis-aligned square of side `ratio * max(w, h)`,
/// centered on the box center, shifted inward to stay inside the frame and
/// shrunk to `min(frame_w, frame_h)` only when the frame is smaller than
/// the square.
pub fn expand_to_square(
    bbox: &BoundingBox,
    ratio: f64,
    frame_w: usize,
    frame_h: usize,
) -> Result<BoundingBox> {
    if !(ratio.is_finite() && ratio >= 1.0) {
        return Err(Error::invalid(format!("ratio must be >= 1, got {ratio}")));
    }
    if !bbox.fits_within(frame_w, frame_h) {
        return Err(Error::invalid(format!(
            "box {bbox:?} exceeds frame {frame_w}x{frame_h}"
        )));
    }
    let max_dim = bbox.width().max(bbox.height());
    let mut side = (ratio * max_dim as f64).round() as usize;
    side = side.max(1).min(frame_w.min(frame_h));

    let (cx, cy) = bbox.center();
    let x0 = shift_into_frame(cx, side, frame_w);
    let y0 = shift_into_frame(cy, side, frame_h);
    BoundingBox::new(x0, y0, x0 + side, y0 + side)
}

/// Copies the pixels inside `bbox`. The box must fit the frame.
pub fn crop_image(img: &ImageBuffer, bbox: &BoundingBox) -> Result<ImageBuffer> {
    if !bbox.fits_within(img.width(), img.height()) {
        return Err(Error::invalid(format!(
            "crop box {bbox:?} exceeds frame {}x{}",
            img.width(),
            img.height()
        )));
    }
    let mut out = ImageBuffer::new(bbox.width(), bbox.height(), img.channels());
    for y in 0..bbox.height() {
        for x in 0..bbox.width() {
            for c in 0..img.channels() {
                out.set(x, y, c, img.get(bbox.x0() + x, bbox.y0() + y, c));
            }
        }
    }
    Ok(out)
}

pub fn crop_mask(mask: &BinaryMask, bbox: &BoundingBox) -> Result<BinaryMask> {
    if !bbox.fits_within(mask.width(), mask.height()) {
        return Err(Error::invalid(format!(
            "crop box {bbox:?} exceeds frame {}x{}",
            mask.width(),
            mask.height()
        )));
    }
    let mut out = BinaryMask::new(bbox.width(), bbox.height());
    for y in 0..bbox.height() {
        for x in 0..bbox.width() {
            out.set(x, y, mask.get(bbox.x0() + x, bbox.y0() + y));
        }
    }
    Ok(out)
}

/// Zeroes the interior of `bbox` in place.
pub fn hollow_box(img: &mut ImageBuffer, bbox: &BoundingBox) {
    for y in bbox.y0()..bbox.y1().min(img.height()) {
        for x in bbox.x0()..bbox.x1().min(img.width()) {
            for c in 0..img.channels() {
                img.set(x, y, c, 0.0);
            }
        }
    }
}

fn shift_into_frame(center: f64, side: usize, frame: usize) -> usize {
    let start = (center - side as f64 / 2.0).round() as isize;
    start.clamp(0, frame as isize - side as isize) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_mask(w: usize, h: usize, bx: usize, by: usize, bw: usize, bh: usize) -> BinaryMask {
        let mut m = BinaryMask::new(w, h);
        for y in by..by + bh {
            for x in bx..bx + bw {
                m.set(x, y, 1);
            }
        }
        m
    }

    #[test]
    fn crop_of_full_frame_object_is_identity_with_background_zeroing() {
        let img = ImageBuffer::from_fn(6, 6, 3, |x, y, c| {
            ((x + 2 * y + 3 * c) % 7) as f64 / 7.0
        });
        let mask = block_mask(6, 6, 0, 0, 6, 6);
        let (crop, cmask) = center_crop_object(&img, &mask, 0.0).unwrap();
        assert_eq!((crop.width(), crop.height()), (6, 6));
        assert_eq!(crop.data(), img.data());
        assert_eq!(cmask.count_ones(), 36);
    }

    #[test]
    fn corner_block_crop_contains_exactly_the_block() {
        // Bounding-box oracle: a 3x3 block at the corner of a 10x10 frame
        // with pad 0 must come back as the 3x3 block itself.
        let img = ImageBuffer::from_fn(10, 10, 3, |x, y, _| if x < 3 && y < 3 { 0.8 } else { 0.2 });
        let mask = block_mask(10, 10, 0, 0, 3, 3);
        let (crop, cmask) = center_crop_object(&img, &mask, 0.0).unwrap();
        assert_eq!((crop.width(), crop.height()), (3, 3));
        assert_eq!(cmask.count_ones(), 9);
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(crop.get(x, y, 0), 0.8);
            }
        }
    }

    #[test]
    fn background_pixels_are_zeroed() {
        let img = ImageBuffer::from_fn(8, 8, 3, |_, _, _| 1.0);
        let mask = block_mask(8, 8, 2, 2, 4, 2); // 4x2 block -> 4x4 square crop
        let (crop, cmask) = center_crop_object(&img, &mask, 0.0).unwrap();
        assert_eq!((crop.width(), crop.height()), (4, 4));
        for y in 0..4 {
            for x in 0..4 {
                let expect = if cmask.get(x, y) == 1 { 1.0 } else { 0.0 };
                assert_eq!(crop.get(x, y, 0), expect);
            }
        }
    }

    #[test]
    fn empty_mask_is_an_error() {
        let img = ImageBuffer::new(4, 4, 3);
        let mask = BinaryMask::new(4, 4);
        assert!(matches!(
            center_crop_object(&img, &mask, 0.0),
            Err(Error::EmptyMask(_))
        ));
    }

    #[test]
    fn expand_shifts_square_into_frame() {
        // Geometry oracle for the center-then-shift rule.
        let b = BoundingBox::new(10, 10, 30, 50).unwrap();
        let sq = expand_to_square(&b, 2.0, 100, 100).unwrap();
        assert_eq!((sq.x0(), sq.y0(), sq.x1(), sq.y1()), (0, 0, 80, 80));
    }

    #[test]
    fn expand_ratio_one_on_square_box_is_identity() {
        let b = BoundingBox::new(10, 10, 30, 30).unwrap();
        let sq = expand_to_square(&b, 1.0, 100, 100).unwrap();
        assert_eq!((sq.x0(), sq.y0(), sq.x1(), sq.y1()), (10, 10, 30, 30));
    }

    #[test]
    fn expand_centered_box_stays_concentric() {
        let b = BoundingBox::new(40, 40, 60, 60).unwrap();
        let sq = expand_to_square(&b, 2.0, 200, 200).unwrap();
        assert_eq!((sq.x0(), sq.y0(), sq.x1(), sq.y1()), (30, 30, 70, 70));
    }
}
