//! Image loading and saving. Intensities are normalized to `[0, 1]` on
//! load; masks are written as 8-bit 0/255 grayscale.

use std::path::Path;

use ellseg_core::grid::ScalarField;
use ellseg_core::metrics::BinaryMask;
use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::CliError;

fn open(path: &Path) -> Result<DynamicImage, CliError> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => CliError::Unreadable {
            path: path.to_path_buf(),
            source: e,
        },
        other => CliError::BadImage {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

/// Loads an image as one channel plane per color component, normalized to
/// `[0, 1]`. Grayscale gives one plane, color three; 16-bit grayscale keeps
/// its full depth.
pub fn load_channels(path: &Path) -> Result<Vec<ScalarField>, CliError> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let planes = match img {
        DynamicImage::ImageLuma8(buf) => {
            vec![ScalarField::from_fn(h, w, |r, c| {
                buf.get_pixel(c as u32, r as u32).0[0] as f64 / 255.0
            })]
        }
        DynamicImage::ImageLuma16(buf) => {
            vec![ScalarField::from_fn(h, w, |r, c| {
                buf.get_pixel(c as u32, r as u32).0[0] as f64 / 65535.0
            })]
        }
        other => {
            let rgb = other.to_rgb8();
            (0..3)
                .map(|k| {
                    ScalarField::from_fn(h, w, |r, c| {
                        rgb.get_pixel(c as u32, r as u32).0[k] as f64 / 255.0
                    })
                })
                .collect()
        }
    };
    Ok(planes)
}

/// Loads a mask image; any nonzero pixel is foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask, CliError> {
    let gray = open(path)?.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    Ok(BinaryMask::from_fn(h, w, |r, c| {
        gray.get_pixel(c as u32, r as u32).0[0] > 0
    }))
}

pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<(), CliError> {
    let mut img = GrayImage::new(mask.width() as u32, mask.height() as u32);
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            img.put_pixel(c as u32, r as u32, image::Luma([if mask.get(r, c) { 255 } else { 0 }]));
        }
    }
    img.save(path).map_err(|e| save_error(path, e))
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<(), CliError> {
    img.save(path).map_err(|e| save_error(path, e))
}

fn save_error(path: &Path, e: image::ImageError) -> CliError {
    match e {
        image::ImageError::IoError(source) => CliError::Unwritable {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::BadImage {
            path: path.to_path_buf(),
            source: other,
        },
    }
}

/// Renders channel planes back to an RGB canvas for overlay drawing.
pub fn channels_to_rgb(channels: &[ScalarField]) -> RgbImage {
    let (h, w) = (channels[0].height(), channels[0].width());
    let mut img = RgbImage::new(w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            let px = if channels.len() >= 3 {
                [
                    to_u8(channels[0].get(r, c)),
                    to_u8(channels[1].get(r, c)),
                    to_u8(channels[2].get(r, c)),
                ]
            } else {
                let v = to_u8(channels[0].get(r, c));
                [v, v, v]
            };
            img.put_pixel(c as u32, r as u32, image::Rgb(px));
        }
    }
    img
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trips_through_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = BinaryMask::from_fn(7, 5, |r, c| (r + c) % 3 == 0);
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }

    #[test]
    fn grayscale_png_normalizes_to_unit_range(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let mut img = GrayImage::new(3, 2);
        img.put_pixel(0, 0, image::Luma([255]));
        img.put_pixel(2, 1, image::Luma([51]));
        img.save(&path).unwrap();
        let planes = load_channels(&path).unwrap();
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0].get(0, 0), 1.0);
        assert!((planes[0].get(1, 2) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn binary_pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mask = BinaryMask::from_fn(4, 6, |r, c| r == 2 || c == 3);
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_channels(Path::new("/nonexistent/nothing.png")).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::exit::IO);
    }
}
