//! Nearest-neighbor and bilinear resampling with center-aligned pixel grids.

use super::buffer::{BinaryMask, ImageBuffer};

#[inline]
fn nearest_src(dst: usize, src_len: usize, dst_len: usize) -> usize {
    let s = (dst as f64 + 0.5) * src_len as f64 / dst_len as f64;
    (s.floor() as usize).min(src_len - 1)
}

/// Nearest-neighbor resize; exact replication for integer upscales.
pub fn resize_nearest(img: &ImageBuffer, new_w: usize, new_h: usize) -> ImageBuffer {
    assert!(new_w >= 1 && new_h >= 1);
    if new_w == img.width() && new_h == img.height() {
        return img.clone();
    }
    let mut out = ImageBuffer::new(new_w, new_h, img.channels());
    for y in 0..new_h {
        let sy = nearest_src(y, img.height(), new_h);
        for x in 0..new_w {
            let sx = nearest_src(x, img.width(), new_w);
            for c in 0..img.channels() {
                out.set(x, y, c, img.get(sx, sy, c));
            }
        }
    }
    out
}

pub fn resize_nearest_mask(mask: &BinaryMask, new_w: usize, new_h: usize) -> BinaryMask {
    assert!(new_w >= 1 && new_h >= 1);
    if new_w == mask.width() && new_h == mask.height() {
        return mask.clone();
    }
    let mut out = BinaryMask::new(new_w, new_h);
    for y in 0..new_h {
        let sy = nearest_src(y, mask.height(), new_h);
        for x in 0..new_w {
            let sx = nearest_src(x, mask.width(), new_w);
            out.set(x, y, mask.get(sx, sy));
        }
    }
    out
}

/// Bilinear resize with border clamping.
pub fn resize_bilinear(img: &ImageBuffer, new_w: usize, new_h: usize) -> ImageBuffer {
    assert!(new_w >= 1 && new_h >= 1);
    if new_w == img.width() && new_h == img.height() {
        return img.clone();
    }
    let mut out = ImageBuffer::new(new_w, new_h, img.channels());
    let (sw, sh) = (img.width(), img.height());
    for y in 0..new_h {
        let fy = ((y as f64 + 0.5) * sh as f64 / new_h as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = fy - y0 as f64;
        for x in 0..new_w {
            let fx =
                ((x as f64 + 0.5) * sw as f64 / new_w as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f64;
            for c in 0..img.channels() {
                let top = img.get(x0, y0, c) * (1.0 - wx) + img.get(x1, y0, c) * wx;
                let bot = img.get(x0, y1, c) * (1.0 - wx) + img.get(x1, y1, c) * wx;
                out.set(x, y, c, (top * (1.0 - wy) + bot * wy).clamp(0.0, 1.0));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_integer_upscale_replicates_pixels() {
        let img = ImageBuffer::from_fn(2, 2, 1, |x, y, _| (y * 2 + x) as f64 / 4.0);
        let up = resize_nearest(&img, 4, 4);
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(up.get(x, y, 0), img.get(x / 2, y / 2, 0));
            }
        }
    }

    #[test]
    fn bilinear_identity_is_exact() {
        let img = ImageBuffer::from_fn(5, 3, 3, |x, y, c| ((x + y + c) % 4) as f64 / 4.0);
        assert_eq!(resize_bilinear(&img, 5, 3).data(), img.data());
    }

    #[test]
    fn bilinear_of_constant_stays_constant() {
        let img = ImageBuffer::from_fn(7, 7, 1, |_, _, _| 0.4);
        let out = resize_bilinear(&img, 13, 5);
        assert!(out.data().iter().all(|&v| (v - 0.4).abs() < 1e-12));
    }
}
