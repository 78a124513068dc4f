//! Raster file I/O: binary PGM (P5) and 8/16-bit PNG, chosen by extension.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{Error, Result};
use crate::image::{GrayImage, RgbImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FileKind {
    Pgm,
    Png,
}

fn kind_for(path: &Path) -> Result<FileKind> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("pgm") | Some("pnm") => Ok(FileKind::Pgm),
        Some("png") => Ok(FileKind::Png),
        _ => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "expected a .pgm or .png extension".into(),
        }),
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let unreadable = |reason: String| Error::Unreadable {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?;
    let img = reader.decode().map_err(|e| unreadable(e.to_string()))?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::EmptyImage);
    }
    Ok(img)
}

/// Channel planes scaled to `[0, 1]`. Gray sources yield a single plane.
fn planes(path: &Path, img: DynamicImage) -> Result<Vec<GrayImage>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let unsupported = |what: &str| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: format!("unsupported pixel layout {what}"),
    };
    let split = |samples: Vec<f64>, channels: usize, keep: usize| -> Vec<GrayImage> {
        (0..keep)
            .map(|c| {
                let plane = samples.iter().skip(c).step_by(channels).copied().collect();
                GrayImage::from_raw(w, h, plane)
            })
            .collect()
    };
    let to_unit8 = |v: &[u8]| v.iter().map(|&b| f64::from(b) / 255.0).collect::<Vec<_>>();
    let to_unit16 = |v: &[u16]| v.iter().map(|&b| f64::from(b) / 65535.0).collect::<Vec<_>>();
    Ok(match img {
        DynamicImage::ImageLuma8(buf) => split(to_unit8(buf.as_raw()), 1, 1),
        DynamicImage::ImageLumaA8(buf) => split(to_unit8(buf.as_raw()), 2, 1),
        DynamicImage::ImageLuma16(buf) => split(to_unit16(buf.as_raw()), 1, 1),
        DynamicImage::ImageLumaA16(buf) => split(to_unit16(buf.as_raw()), 2, 1),
        DynamicImage::ImageRgb8(buf) => split(to_unit8(buf.as_raw()), 3, 3),
        DynamicImage::ImageRgba8(buf) => split(to_unit8(buf.as_raw()), 4, 3),
        DynamicImage::ImageRgb16(buf) => split(to_unit16(buf.as_raw()), 3, 3),
        DynamicImage::ImageRgba16(buf) => split(to_unit16(buf.as_raw()), 4, 3),
        other => return Err(unsupported(&format!("{:?}", other.color()))),
    })
}

/// Loads a raster as gray intensities in `[0, 1]`. Color inputs are reduced
/// to luma `0.299 R + 0.587 G + 0.114 B`.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let mut planes = planes(path, decode(path)?)?;
    if planes.len() == 1 {
        return Ok(planes.pop().expect("one plane"));
    }
    Ok(RgbImage::new(planes.remove(0), planes.remove(0), planes.remove(0))?.luminance())
}

/// Loads a raster as RGB. Gray inputs are replicated into all channels.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let mut planes = planes(path, decode(path)?)?;
    if planes.len() == 1 {
        return Ok(RgbImage::from_gray(&planes[0]));
    }
    RgbImage::new(planes.remove(0), planes.remove(0), planes.remove(0))
}

/// Clamps to `[0, 1]` and rounds half up onto 0..=255.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn write_bytes(path: &Path, bytes: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<()> {
    let unwritable = |reason: String| Error::Unwritable {
        path: path.to_path_buf(),
        reason,
    };
    let kind = kind_for(path)?;
    let file = File::create(path).map_err(|e| unwritable(e.to_string()))?;
    let out = BufWriter::new(file);
    let (w, h) = (w as u32, h as u32);
    match kind {
        FileKind::Png => PngEncoder::new(out)
            .write_image(bytes, w, h, color)
            .map_err(|e| unwritable(e.to_string())),
        FileKind::Pgm => {
            if color != ExtendedColorType::L8 {
                return Err(Error::UnsupportedFormat {
                    path: path.to_path_buf(),
                    reason: "PGM output is gray only; use .png for color".into(),
                });
            }
            PnmEncoder::new(out)
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(bytes, w, h, color)
                .map_err(|e| unwritable(e.to_string()))
        }
    }
}

/// Writes an 8-bit gray image; P5 for `.pgm`/`.pnm`, PNG for `.png`.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    write_bytes(path.as_ref(), &bytes, img.width(), img.height(), ExtendedColorType::L8)
}

/// Writes an 8-bit RGB PNG.
pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::with_capacity(img.r.len() * 3);
    for i in 0..img.r.len() {
        bytes.push(quantize(img.r.data()[i]));
        bytes.push(quantize(img.g.data()[i]));
        bytes.push(quantize(img.b.data()[i]));
    }
    let (w, h) = img.dims();
    write_bytes(path.as_ref(), &bytes, w, h, ExtendedColorType::Rgb8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("focusfuse-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn p5_bytes_scale_to_unit_range() {
        let path = tmp("tiny.pgm");
        let mut f = File::create(&path).unwrap();
        f.write_all(b"P5\n2 2\n255\n").unwrap();
        f.write_all(&[0, 255, 255, 0]).unwrap();
        drop(f);
        let img = load_image(&path).unwrap();
        assert_eq!(img.dims(), (2, 2));
        assert_eq!(img.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn truncated_file_is_unreadable() {
        let path = tmp("truncated.pgm");
        let mut f = File::create(&path).unwrap();
        f.write_all(b"P5\n4 4\n255\n").unwrap();
        f.write_all(&[1, 2, 3]).unwrap();
        drop(f);
        let err = load_image(&path).unwrap_err();
        assert!(err.to_string().starts_with("unreadable file"), "{err}");
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = load_image(tmp("does-not-exist.png")).unwrap_err();
        assert!(matches!(err, Error::Unreadable { .. }));
    }

    #[test]
    fn quantization_rounds_half_up_and_clamps() {
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.7), 255);
    }

    #[test]
    fn round_trip_both_formats() {
        let img = GrayImage::from_fn(7, 5, |x, y| ((x * 37 + y * 11) % 256) as f64 / 255.0).unwrap();
        for name in ["rt.pgm", "rt.png"] {
            let path = tmp(name);
            save_image(&img, &path).unwrap();
            let back = load_image(&path).unwrap();
            assert_eq!(back, img, "{name}");
            save_image(&back, &path).unwrap();
            assert_eq!(load_image(&path).unwrap(), img);
        }
    }

    #[test]
    fn rgb_png_round_trip_and_luma() {
        let r = GrayImage::filled(3, 2, 1.0).unwrap();
        let g = GrayImage::filled(3, 2, 0.0).unwrap();
        let b = GrayImage::filled(3, 2, 0.0).unwrap();
        let rgb = RgbImage::new(r, g, b).unwrap();
        let path = tmp("rgb.png");
        save_rgb(&rgb, &path).unwrap();
        assert_eq!(load_rgb(&path).unwrap(), rgb);
        let gray = load_image(&path).unwrap();
        assert!((gray.get(0, 0) - 0.299).abs() < 1e-12);
    }

    #[test]
    fn unknown_extension_is_rejected() {
        let img = GrayImage::zeros(2, 2).unwrap();
        assert!(matches!(
            save_image(&img, tmp("x.bmp")),
            Err(Error::UnsupportedFormat { .. })
        ));
    }
}
