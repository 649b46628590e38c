use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::imageops::{self, FilterType};
use image::{ExtendedColorType, ImageBuffer, ImageEncoder, ImageReader, Luma};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

type GrayF32 = ImageBuffer<Luma<f32>, Vec<f32>>;

/// Hook applied to a decoded image before resizing, e.g. a lung crop.
pub trait ImageTransform: Send + Sync {
    fn apply(&self, image: GrayF32) -> GrayF32;
}

/// The default transform: no cropping.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityCrop;

impl ImageTransform for IdentityCrop {
    fn apply(&self, image: GrayF32) -> GrayF32 {
        image
    }
}

/// Reads an 8-bit grayscale PGM, maps p → p/255, applies `transform`,
/// resizes bilinearly to `size`×`size` and min-max normalizes to [0, 1].
///
/// Returns a 1×size×size tensor. A constant image normalizes to all zeros.
pub fn load_image(path: &Path, size: usize, transform: &dyn ImageTransform) -> Result<Tensor> {
    let decoded = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()?
        .into_luma8();
    let (w, h) = decoded.dimensions();
    let raw: Vec<f32> = decoded.into_raw().into_iter().map(|p| p as f32 / 255.0).collect();
    let gray = GrayF32::from_raw(w, h, raw).expect("buffer matches dimensions");
    let gray = transform.apply(gray);
    let gray = if gray.dimensions() == (size as u32, size as u32) {
        gray
    } else {
        imageops::resize(&gray, size as u32, size as u32, FilterType::Triangle)
    };

    let mut data: Vec<f64> = gray.into_raw().into_iter().map(f64::from).collect();
    let (min, max) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    for v in data.iter_mut() {
        *v = if range > 0.0 { (*v - min) / range } else { 0.0 };
    }
    Tensor::new([1, size, size], data)
}

/// Writes a single-channel image with values in [0, 1] as binary PGM (P5).
pub fn save_image(path: &Path, image: &Tensor) -> Result<()> {
    let shape = image.shape();
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if image.numel() != h * w {
        return Err(Error::Dimension(format!(
            "PGM output needs a single channel, got {shape:?}"
        )));
    }
    let pixels: Vec<u8> = image
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let mut bytes = Vec::new();
    PnmEncoder::new(Cursor::new(&mut bytes))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&pixels, w as u32, h as u32, ExtendedColorType::L8)?;
    crate::io::write_atomic(path, &bytes)
}
