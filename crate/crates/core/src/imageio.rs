//! Reading frames and writing canonical frames and overlays.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, GrayImage, ImageEncoder, RgbImage};
use thiserror::Error;

use crate::facemesh::{Frame, MeshError};
use crate::warp::CanonicalFrame;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{}: {source}", path.display())]
    Frame {
        path: PathBuf,
        #[source]
        source: MeshError,
    },
}

/// Rec. 601 luma.
pub fn luma601(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Loads a PNG or PNM image as a grayscale frame in `[0, 1]`. Color inputs
/// are converted with Rec. 601 weights; alpha is ignored.
pub fn load_frame(path: &Path) -> Result<Frame, ImageIoError> {
    let img = image::open(path).map_err(|source| ImageIoError::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            let g = img.to_luma16();
            g.as_raw().iter().map(|&v| v as f64 / 65535.0).collect()
        }
        other => {
            let rgb = other.to_rgb32f();
            rgb.pixels()
                .map(|p| luma601(p[0] as f64, p[1] as f64, p[2] as f64).clamp(0.0, 1.0))
                .collect()
        }
    };
    Frame::new(w, h, data).map_err(|source| ImageIoError::Frame {
        path: path.to_path_buf(),
        source,
    })
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn canonical_to_gray(frame: &CanonicalFrame) -> GrayImage {
    let g = frame.intensity();
    GrayImage::from_fn(g.width() as u32, g.height() as u32, |x, y| {
        image::Luma([quantize(g.get(x as usize, y as usize))])
    })
}

pub fn frame_to_gray(frame: &Frame) -> GrayImage {
    GrayImage::from_fn(frame.width() as u32, frame.height() as u32, |x, y| {
        image::Luma([quantize(frame.get(x as usize, y as usize))])
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, ImageIoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| ImageIoError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn encode_png(path: &Path, bytes: &[u8], w: u32, h: u32, color: ExtendedColorType) -> Result<(), ImageIoError> {
    let mut out = create(path)?;
    PngEncoder::new(&mut out)
        .write_image(bytes, w, h, color)
        .map_err(|source| ImageIoError::Decode {
            path: path.to_path_buf(),
            source,
        })?;
    out.flush().map_err(|source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_gray_png(path: &Path, img: &GrayImage) -> Result<(), ImageIoError> {
    encode_png(path, img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)
}

pub fn write_rgb_png(path: &Path, img: &RgbImage) -> Result<(), ImageIoError> {
    encode_png(path, img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)
}

/// Binary PGM (`P5`, maxval 255).
pub fn write_gray_pgm(path: &Path, img: &GrayImage) -> Result<(), ImageIoError> {
    let mut out = create(path)?;
    let io = |source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    };
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height()).map_err(io)?;
    out.write_all(img.as_raw()).map_err(io)?;
    out.flush().map_err(io)
}
