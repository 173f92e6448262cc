//! PNG / binary-PGM ingestion and debug-dump output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, ImageEncoder, ImageReader};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::GrayImage;

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// Loads a PNG or binary PGM file as a `[0, 1]` gray image. Color inputs
/// are reduced by luma weighting (0.299 R + 0.587 G + 0.114 B).
pub fn load_gray<T: Real>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = reader.decode().map_err(|e| Error::ImageFormat {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if decoded.width() == 0 || decoded.height() == 0 {
        return Err(Error::EmptyImage);
    }
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<T> = match decoded {
        DynamicImage::ImageLuma8(img) => {
            img.pixels().map(|p| T::of(p.0[0] as f64 / 255.0)).collect()
        }
        DynamicImage::ImageLumaA8(img) => {
            img.pixels().map(|p| T::of(p.0[0] as f64 / 255.0)).collect()
        }
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                T::of(
                    LUMA_R * (r as f64 / 255.0)
                        + LUMA_G * (g as f64 / 255.0)
                        + LUMA_B * (b as f64 / 255.0),
                )
            })
            .collect(),
    };
    GrayImage::from_vec(w, h, data)
}

fn to_bytes<T: Real>(img: &GrayImage<T>) -> Vec<u8> {
    img.pixels()
        .iter()
        .map(|&v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Writes an 8-bit binary PGM (P5).
pub fn save_pgm<T: Real>(img: &GrayImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let encoder = PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    encoder
        .write_image(&to_bytes(img), img.width() as u32, img.height() as u32, ColorType::L8.into())
        .map_err(|e| Error::ImageFormat {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Writes an 8-bit grayscale PNG.
pub fn save_png<T: Real>(img: &GrayImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    image::save_buffer(
        path,
        &to_bytes(img),
        img.width() as u32,
        img.height() as u32,
        ColorType::L8,
    )
    .map_err(|e| Error::ImageFormat {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
