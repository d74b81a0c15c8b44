//! PNG boundaries: 8-bit RGB for images, single-channel 0/255 for masks.

use std::path::Path;

use super::buffer::{BinaryMask, ImageBuffer};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::ImageCodec {
            path: path.into(),
            source: other,
        },
    })
}

/// Loads an RGB PNG into a 3-channel buffer, mapping 0-255 to [0, 1].
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let rgb = open(path)?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    ImageBuffer::from_vec(w, h, 3, data)
}

/// Saves a 1- or 3-channel buffer as PNG, mapping [0, 1] to rounded 0-255.
pub fn save_image(img: &ImageBuffer, path: &Path) -> Result<()> {
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = match img.channels() {
        1 => {
            let buf: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
            image::GrayImage::from_raw(w, h, buf)
                .expect("buffer length matches dimensions")
                .save(path)
        }
        _ => {
            let buf: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
            image::RgbImage::from_raw(w, h, buf)
                .expect("buffer length matches dimensions")
                .save(path)
        }
    };
    result.map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::ImageCodec {
            path: path.into(),
            source: other,
        },
    })
}

/// Loads a single-channel PNG as a mask; values >= 128 count as set.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let gray = open(path)?.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray.as_raw().iter().map(|&v| (v >= 128) as u8).collect();
    BinaryMask::from_vec(w, h, data)
}

/// Saves a mask as a single-channel PNG with values 0 / 255.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let buf: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, buf)
        .expect("buffer length matches dimensions")
        .save(path)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            other => Error::ImageCodec {
                path: path.into(),
                source: other,
            },
        })
}
