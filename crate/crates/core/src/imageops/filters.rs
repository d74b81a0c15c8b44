//! Grayscale conversion, Sobel high-pass filtering, binary morphology, and
//! the masked high-frequency map built from them.

use super::buffer::{BinaryMask, ImageBuffer};
use crate::error::{Error, Result};

/// The pair of 3x3 high-pass stencils. Each sums to zero and the vertical
/// stencil is the transpose of the horizontal one.
#[derive(Debug, Clone, PartialEq)]
pub struct SobelKernels {
    pub horizontal: [[f64; 3]; 3],
    pub vertical: [[f64; 3]; 3],
}

impl Default for SobelKernels {
    fn default() -> Self {
        let horizontal = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        Self {
            horizontal,
            vertical: transpose3(&horizontal),
        }
    }
}

fn transpose3(k: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for (r, row) in k.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            t[c][r] = *v;
        }
    }
    t
}

/// Rec.601 luma: 0.299 R + 0.587 G + 0.114 B.
///
/// Evaluated as `b + 0.299 (r - b) + 0.587 (g - b)` so gray-axis inputs
/// (r = g = b) pass through bit-exactly.
pub fn to_grayscale(img: &ImageBuffer) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::invalid(format!(
            "to_grayscale expects 3 channels, got {}",
            img.channels()
        )));
    }
    let mut out = ImageBuffer::new(img.width(), img.height(), 1);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (r, g, b) = (img.get(x, y, 0), img.get(x, y, 1), img.get(x, y, 2));
            let v = b + 0.299 * (r - b) + 0.587 * (g - b);
            out.set(x, y, 0, v.clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// Applies a 3x3 stencil with zero padding at the borders.
fn apply_stencil(gray: &ImageBuffer, kernel: &[[f64; 3]; 3]) -> Vec<f64> {
    let (w, h) = (gray.width() as isize, gray.height() as isize);
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (sx, sy) = (x + dx, y + dy);
                    if sx >= 0 && sx < w && sy >= 0 && sy < h {
                        acc += kernel[(dy + 1) as usize][(dx + 1) as usize]
                            * gray.get(sx as usize, sy as usize, 0);
                    }
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    out
}

/// Sum of absolute Sobel responses, `clamp(|Gx| + |Gy|, 0, 1)` per pixel.
///
/// The magnitude sum (rather than the signed sum) keeps the response
/// non-negative and free of orientation-dependent cancellation.
pub fn sobel_response(gray: &ImageBuffer) -> Result<ImageBuffer> {
    if gray.channels() != 1 {
        return Err(Error::invalid(format!(
            "sobel_response expects a single channel, got {}",
            gray.channels()
        )));
    }
    let kernels = SobelKernels::default();
    let gx = apply_stencil(gray, &kernels.horizontal);
    let gy = apply_stencil(gray, &kernels.vertical);
    let mut out = ImageBuffer::new(gray.width(), gray.height(), 1);
    for y in 0..gray.height() {
        for x in 0..gray.width() {
            let i = y * gray.width() + x;
            out.set(x, y, 0, (gx[i].abs() + gy[i].abs()).clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// `radius` iterations of 3x3 erosion; pixels outside the frame count as 0.
/// Radius 0 is the identity.
pub fn erode_mask(mask: &BinaryMask, radius: usize) -> BinaryMask {
    morph(mask, radius, false)
}

/// `radius` iterations of 3x3 dilation; pixels outside the frame count as 0.
pub fn dilate_mask(mask: &BinaryMask, radius: usize) -> BinaryMask {
    morph(mask, radius, true)
}

fn morph(mask: &BinaryMask, radius: usize, dilate: bool) -> BinaryMask {
    let mut cur = mask.clone();
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    for _ in 0..radius {
        let mut next = BinaryMask::new(mask.width(), mask.height());
        for y in 0..h {
            for x in 0..w {
                let mut acc = if dilate { 0u8 } else { 1u8 };
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (sx, sy) = (x + dx, y + dy);
                        let v = if sx >= 0 && sx < w && sy >= 0 && sy < h {
                            cur.get(sx as usize, sy as usize)
                        } else {
                            0
                        };
                        if dilate {
                            acc = acc.max(v);
                        } else {
                            acc = acc.min(v);
                        }
                    }
                }
                next.set(x as usize, y as usize, acc);
            }
        }
        cur = next;
    }
    cur
}

/// High-frequency map: Sobel response of the grayscale image, broadcast over
/// channels and Hadamard-multiplied by the RGB image and the eroded mask.
/// Zero wherever the eroded mask is zero.
pub fn high_frequency_map(
    img: &ImageBuffer,
    mask: &BinaryMask,
    erosion_radius: usize,
) -> Result<ImageBuffer> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(Error::invalid(format!(
            "image {}x{} and mask {}x{} dimensions differ",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    let response = sobel_response(&to_grayscale(img)?)?;
    let eroded = erode_mask(mask, erosion_radius);
    let mut out = ImageBuffer::new(img.width(), img.height(), 3);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if eroded.get(x, y) == 1 {
                let r = response.get(x, y, 0);
                for c in 0..3 {
                    out.set(x, y, c, r * img.get(x, y, c));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent brute-force oracle: direct 3x3 stencil loops, magnitude
    // sum, clamp, zero padding. Kept free of the library's apply_stencil.
    fn oracle_sobel(gray: &ImageBuffer) -> Vec<f64> {
        let kh: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let kv: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        let (w, h) = (gray.width(), gray.height());
        let mut out = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (sx, sy) = (x + dx, y + dy);
                        if sx >= 0 && (sx as usize) < w && sy >= 0 && (sy as usize) < h {
                            let v = gray.get(sx as usize, sy as usize, 0);
                            gx += kh[(dy + 1) as usize][(dx + 1) as usize] * v;
                            gy += kv[(dy + 1) as usize][(dx + 1) as usize] * v;
                        }
                    }
                }
                out[(y as usize) * w + x as usize] = (gx.abs() + gy.abs()).clamp(0.0, 1.0);
            }
        }
        out
    }

    #[test]
    fn kernels_are_highpass_and_transposed() {
        let k = SobelKernels::default();
        let sum_h: f64 = k.horizontal.iter().flatten().sum();
        let sum_v: f64 = k.vertical.iter().flatten().sum();
        assert_eq!(sum_h, 0.0);
        assert_eq!(sum_v, 0.0);
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(k.horizontal[r][c], k.vertical[c][r]);
            }
        }
    }

    #[test]
    fn grayscale_of_primaries() {
        let white = ImageBuffer::from_fn(2, 2, 3, |_, _, _| 1.0);
        let black = ImageBuffer::new(2, 2, 3);
        let red = ImageBuffer::from_fn(2, 2, 3, |_, _, c| if c == 0 { 1.0 } else { 0.0 });
        assert!(to_grayscale(&white).unwrap().data().iter().all(|&v| v == 1.0));
        assert!(to_grayscale(&black).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(to_grayscale(&red)
            .unwrap()
            .data()
            .iter()
            .all(|&v| (v - 0.299).abs() < 1e-15));
    }

    #[test]
    fn grayscale_rejects_single_channel() {
        assert!(to_grayscale(&ImageBuffer::new(2, 2, 1)).is_err());
        assert!(sobel_response(&ImageBuffer::new(2, 2, 3)).is_err());
    }

    #[test]
    fn sobel_kills_constant_images() {
        for level in [0.0, 0.25, 1.0] {
            let img = ImageBuffer::from_fn(7, 5, 1, |_, _, _| level);
            let resp = sobel_response(&img).unwrap();
            assert!(resp.data().iter().all(|&v| v == 0.0), "level {level}");
        }
    }

    #[test]
    fn sobel_impulse_matches_convolution_oracle() {
        // Frozen from the oracle: a 0.25 impulse at the center of a 5x5
        // zero image responds with 0.5 * 1 on all eight neighbors
        // (|Kh| + |Kv| is 2 at every off-center tap) and 0 elsewhere.
        let img = ImageBuffer::from_fn(5, 5, 1, |x, y, _| if x == 2 && y == 2 { 0.25 } else { 0.0 });
        let resp = sobel_response(&img).unwrap();
        let oracle = oracle_sobel(&img);
        assert_eq!(resp.data(), oracle.as_slice());
        for y in 0..5usize {
            for x in 0..5usize {
                let neighbor = x.abs_diff(2) <= 1 && y.abs_diff(2) <= 1 && !(x == 2 && y == 2);
                let expect = if neighbor { 0.5 } else { 0.0 };
                assert_eq!(resp.get(x, y, 0), expect, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn sobel_step_edge_is_localized() {
        let img = ImageBuffer::from_fn(8, 6, 1, |x, _, _| if x < 4 { 0.0 } else { 1.0 });
        let resp = sobel_response(&img).unwrap();
        let oracle = oracle_sobel(&img);
        assert_eq!(resp.data(), oracle.as_slice());
        // Away from the frame border, response is confined to the two
        // columns straddling the edge.
        for y in 1..5usize {
            for x in 0..8usize {
                let on_edge = x == 3 || x == 4;
                assert_eq!(resp.get(x, y, 0) > 0.0, on_edge, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn erosion_radius_zero_is_identity() {
        let mut m = BinaryMask::new(6, 6);
        m.set(3, 2, 1);
        m.set(4, 4, 1);
        assert_eq!(erode_mask(&m, 0), m);
    }

    #[test]
    fn erosion_of_full_mask_keeps_interior() {
        let m = BinaryMask::filled(5, 5);
        let e = erode_mask(&m, 1);
        for y in 0..5 {
            for x in 0..5 {
                let interior = (1..4).contains(&x) && (1..4).contains(&y);
                assert_eq!(e.get(x, y), interior as u8);
            }
        }
    }

    #[test]
    fn erosion_removes_single_pixel() {
        let mut m = BinaryMask::new(5, 5);
        m.set(2, 2, 1);
        assert!(erode_mask(&m, 1).is_empty());
    }

    #[test]
    fn hf_map_of_constant_image_is_zero() {
        let img = ImageBuffer::from_fn(8, 8, 3, |_, _, _| 0.6);
        let hf = high_frequency_map(&img, &BinaryMask::filled(8, 8), 1).unwrap();
        assert!(hf.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hf_map_with_zero_mask_is_zero() {
        let img = ImageBuffer::from_fn(8, 8, 3, |x, y, _| ((x ^ y) & 1) as f64);
        let hf = high_frequency_map(&img, &BinaryMask::new(8, 8), 0).unwrap();
        assert!(hf.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hf_map_checkerboard_matches_composition_oracle() {
        let img = ImageBuffer::from_fn(8, 8, 3, |x, y, c| {
            if (x + y) % 2 == 0 {
                [0.9, 0.5, 0.1][c]
            } else {
                [0.2, 0.7, 0.4][c]
            }
        });
        let mask = BinaryMask::filled(8, 8);
        let hf = high_frequency_map(&img, &mask, 1).unwrap();

        // Compose the three oracle kernels by hand.
        let gray = to_grayscale(&img).unwrap();
        let resp = oracle_sobel(&gray);
        let eroded = erode_mask(&mask, 1);
        for y in 0..8 {
            for x in 0..8 {
                for c in 0..3 {
                    let expect = if eroded.get(x, y) == 1 {
                        resp[y * 8 + x] * img.get(x, y, c)
                    } else {
                        0.0
                    };
                    assert!((hf.get(x, y, c) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hf_map_dimension_mismatch_rejected() {
        let img = ImageBuffer::new(4, 4, 3);
        let mask = BinaryMask::new(5, 4);
        assert!(high_frequency_map(&img, &mask, 1).is_err());
    }

    fn arb_mask(side: usize) -> impl Strategy<Value = BinaryMask> {
        prop::collection::vec(0u8..=1, side * side)
            .prop_map(move |v| BinaryMask::from_vec(side, side, v).unwrap())
    }

    fn arb_image(side: usize) -> impl Strategy<Value = ImageBuffer> {
        prop::collection::vec(0.0f64..=1.0, side * side * 3)
            .prop_map(move |v| ImageBuffer::from_vec(side, side, 3, v).unwrap())
    }

    proptest! {
        #[test]
        fn hf_map_support_is_inside_eroded_mask(img in arb_image(8), mask in arb_mask(8), r in 0usize..3) {
            let hf = high_frequency_map(&img, &mask, r).unwrap();
            let eroded = erode_mask(&mask, r);
            for y in 0..8 {
                for x in 0..8 {
                    if eroded.get(x, y) == 0 {
                        for c in 0..3 {
                            prop_assert_eq!(hf.get(x, y, c), 0.0);
                        }
                    }
                }
            }
        }

        #[test]
        fn erosion_is_monotone_in_radius(mask in arb_mask(8), r1 in 0usize..3) {
            let r2 = r1 + 1;
            let e1 = erode_mask(&mask, r1);
            let e2 = erode_mask(&mask, r2);
            for y in 0..8 {
                for x in 0..8 {
                    if e2.get(x, y) == 1 {
                        prop_assert_eq!(e1.get(x, y), 1);
                    }
                }
            }
        }

        #[test]
        fn sobel_response_stays_in_unit_range(img in arb_image(8)) {
            let gray = to_grayscale(&img).unwrap();
            let resp = sobel_response(&gray).unwrap();
            prop_assert!(resp.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn gray_axis_inputs_pass_through(g in 0.0f64..=1.0) {
            let img = ImageBuffer::from_fn(3, 3, 3, |_, _, _| g);
            let gray = to_grayscale(&img).unwrap();
            prop_assert!(gray.data().iter().all(|&v| v == g));
        }

        #[test]
        fn operations_are_pure(img in arb_image(6), mask in arb_mask(6)) {
            let a = high_frequency_map(&img, &mask, 1).unwrap();
            let b = high_frequency_map(&img, &mask, 1).unwrap();
            prop_assert_eq!(a.data(), b.data());
        }
    }
}
