//! Image decoding into the YCbCr working space, half-scale reduction, and
//! dataset manifest ingestion.

mod manifest;
mod plane;

pub use manifest::{load_manifest, DatasetManifest, ManifestEntry};
pub(crate) use plane::reflect_index;
pub use plane::Plane;

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest width and height accepted for feature extraction.
pub const MIN_IMAGE_SIDE: usize = 16;

/// Luma plus two chroma planes of one image, all the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct YCbCrImage<T> {
    pub y: Plane<T>,
    pub cb: Plane<T>,
    pub cr: Plane<T>,
    pub source_path: String,
}

impl<T: Real> YCbCrImage<T> {
    pub fn new(y: Plane<T>, cb: Plane<T>, cr: Plane<T>, source_path: impl Into<String>) -> Result<Self> {
        let dims = (y.width(), y.height());
        if (cb.width(), cb.height()) != dims || (cr.width(), cr.height()) != dims {
            return Err(Error::Dimension("Y, Cb and Cr planes differ in size".into()));
        }
        Ok(YCbCrImage {
            y,
            cb,
            cr,
            source_path: source_path.into(),
        })
    }

    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }

    /// Converts interleaved 8-bit RGB samples.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "{} bytes do not hold a {width}x{height} RGB image",
                rgb.len()
            )));
        }
        let n = width * height;
        let (mut y, mut cb, mut cr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for px in rgb.chunks_exact(3) {
            let (yy, bb, rr) = rgb_to_ycbcr(px[0], px[1], px[2]);
            y.push(T::lit(yy));
            cb.push(T::lit(bb));
            cr.push(T::lit(rr));
        }
        YCbCrImage::new(
            Plane::new(width, height, y)?,
            Plane::new(width, height, cb)?,
            Plane::new(width, height, cr)?,
            String::new(),
        )
    }

    /// Grayscale input: luma is the gray level, chroma is neutral.
    pub fn from_gray8(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        let y = Plane::new(width, height, gray.iter().map(|&g| T::lit(g as f64)).collect())?;
        let neutral = Plane::filled(width, height, T::lit(128.0));
        YCbCrImage::new(y, neutral.clone(), neutral, String::new())
    }

    /// Copies a rectangular region of all three planes.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        Ok(YCbCrImage {
            y: self.y.crop(row, col, width, height)?,
            cb: self.cb.crop(row, col, width, height)?,
            cr: self.cr.crop(row, col, width, height)?,
            source_path: self.source_path.clone(),
        })
    }

    pub fn ensure_min_size(&self, side: usize) -> Result<()> {
        self.y.ensure_min_size(side, side)
    }
}

/// Full-range BT.601 conversion, each component clamped to `[0, 255]`.
pub fn rgb_to_ycbcr(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    // integer numerators keep neutral pixels exact (chroma weights sum to 0)
    let (r, g, b) = (r as i64, g as i64, b as i64);
    let y = (299 * r + 587 * g + 114 * b) as f64 / 1e3;
    let cb = 128.0 + (-168_736 * r - 331_264 * g + 500_000 * b) as f64 / 1e6;
    let cr = 128.0 + (500_000 * r - 418_688 * g - 81_312 * b) as f64 / 1e6;
    (y.clamp(0.0, 255.0), cb.clamp(0.0, 255.0), cr.clamp(0.0, 255.0))
}

/// Decodes a PNG, BMP, or binary PPM/PGM file with 8-bit samples.
pub fn decode_image<T: Real>(path: impl AsRef<Path>) -> Result<YCbCrImage<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image_bytes(&bytes).map(|mut img| {
        img.source_path = path.display().to_string();
        img
    })
}

/// Same as [`decode_image`] for an in-memory file.
pub fn decode_image_bytes<T: Real>(bytes: &[u8]) -> Result<YCbCrImage<T>> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Format(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Bmp | ImageFormat::Pnm) => {}
        Some(other) => return Err(Error::Format(format!("{other:?}"))),
        None => return Err(Error::Format("unrecognized file signature".into())),
    }
    let decoded = reader.decode().map_err(|e| Error::Format(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(Error::Dimension(format!(
            "{w}x{h} image is below the {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE} minimum"
        )));
    }
    match decoded {
        DynamicImage::ImageLuma8(buf) => YCbCrImage::from_gray8(w, h, buf.as_raw()),
        DynamicImage::ImageLumaA8(_) => {
            YCbCrImage::from_gray8(w, h, decoded.to_luma8().as_raw())
        }
        DynamicImage::ImageRgb8(buf) => YCbCrImage::from_rgb8(w, h, buf.as_raw()),
        // alpha is ignored
        DynamicImage::ImageRgba8(_) => YCbCrImage::from_rgb8(w, h, decoded.to_rgb8().as_raw()),
        other => Err(Error::Format(format!(
            "{:?} samples are not 8-bit",
            other.color()
        ))),
    }
}

/// Halves both dimensions by averaging 2x2 blocks; odd trailing rows and
/// columns are dropped.
pub fn downsample_half<T: Real>(p: &Plane<T>) -> Result<Plane<T>> {
    if p.width() < 2 || p.height() < 2 {
        return Err(Error::Dimension(format!(
            "cannot halve a {}x{} plane",
            p.width(),
            p.height()
        )));
    }
    let quarter = T::lit(0.25);
    Ok(Plane::from_fn(p.width() / 2, p.height() / 2, |r, c| {
        let (r2, c2) = (2 * r, 2 * c);
        (p.get(r2, c2) + p.get(r2, c2 + 1) + p.get(r2 + 1, c2) + p.get(r2 + 1, c2 + 1)) * quarter
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, RgbImage};
    use proptest::prelude::*;

    fn encode(img: DynamicImage, fmt: ImageFormat) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, fmt).unwrap();
        out.into_inner()
    }

    #[test]
    fn white_and_red_pixels() {
        assert_eq!(rgb_to_ycbcr(255, 255, 255), (255.0, 128.0, 128.0));
        let (y, cb, cr) = rgb_to_ycbcr(255, 0, 0);
        assert!((y - 76.245).abs() < 1e-9);
        assert!((cb - 84.97232).abs() < 1e-9);
        assert_eq!(cr, 255.0);
    }

    #[test]
    fn decodes_png_rgb() {
        let img = RgbImage::from_fn(20, 18, |x, y| image::Rgb([(x * 10) as u8, (y * 10) as u8, 255]));
        let bytes = encode(DynamicImage::ImageRgb8(img), ImageFormat::Png);
        let dec: YCbCrImage<f64> = decode_image_bytes(&bytes).unwrap();
        assert_eq!((dec.width(), dec.height()), (20, 18));
        let (y, cb, cr) = rgb_to_ycbcr(30, 20, 255);
        assert_eq!(dec.y.get(2, 3), y);
        assert_eq!(dec.cb.get(2, 3), cb);
        assert_eq!(dec.cr.get(2, 3), cr);
    }

    #[test]
    fn grayscale_gets_neutral_chroma() {
        let img = GrayImage::from_fn(16, 16, |x, y| image::Luma([(x + y) as u8]));
        for fmt in [ImageFormat::Png, ImageFormat::Bmp, ImageFormat::Pnm] {
            let bytes = encode(DynamicImage::ImageLuma8(img.clone()), fmt);
            let dec: YCbCrImage<f64> = decode_image_bytes(&bytes).unwrap();
            assert_eq!(dec.y.get(3, 5), 8.0, "{fmt:?}");
            assert!(dec.cb.samples().iter().all(|&v| v == 128.0));
            assert!(dec.cr.samples().iter().all(|&v| v == 128.0));
        }
    }

    #[test]
    fn binary_ppm_decodes() {
        let mut bytes = b"P6\n16 16\n255\n".to_vec();
        bytes.extend(std::iter::repeat([255u8, 0, 0]).take(256).flatten());
        let dec: YCbCrImage<f32> = decode_image_bytes(&bytes).unwrap();
        assert!((dec.y.get(0, 0) - 76.245).abs() < 1e-4);
        assert_eq!(dec.cr.get(15, 15), 255.0);
    }

    #[test]
    fn small_image_is_dimension_error() {
        let img = RgbImage::new(8, 8);
        let bytes = encode(DynamicImage::ImageRgb8(img), ImageFormat::Png);
        assert!(matches!(
            decode_image_bytes::<f64>(&bytes),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn unknown_format_and_missing_file() {
        assert!(matches!(
            decode_image_bytes::<f64>(b"definitely not an image"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_image::<f64>("/nonexistent/dir/img.png"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn sixteen_bit_png_is_rejected() {
        let img = image::ImageBuffer::<image::Luma<u16>, _>::from_pixel(16, 16, image::Luma([1000u16]));
        let bytes = encode(DynamicImage::ImageLuma16(img), ImageFormat::Png);
        assert!(matches!(decode_image_bytes::<f64>(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn downsample_examples() {
        let c = Plane::filled(32, 32, 7.0f64);
        let d = downsample_half(&c).unwrap();
        assert_eq!((d.width(), d.height()), (16, 16));
        assert!(d.samples().iter().all(|&v| v == 7.0));

        let p = Plane::from_rows(&[vec![0.0, 2.0], vec![4.0, 6.0]]).unwrap();
        assert_eq!(downsample_half(&p).unwrap().samples(), &[3.0]);

        let odd = Plane::filled(33, 33, 1.0f64);
        let d = downsample_half(&odd).unwrap();
        assert_eq!((d.width(), d.height()), (16, 16));

        assert!(downsample_half(&Plane::filled(1, 5, 0.0f64)).is_err());
    }

    proptest! {
        #[test]
        fn ycbcr_stays_in_range(r: u8, g: u8, b: u8) {
            let (y, cb, cr) = rgb_to_ycbcr(r, g, b);
            for v in [y, cb, cr] {
                prop_assert!((0.0..=255.0).contains(&v));
            }
        }

        #[test]
        fn double_halving_preserves_mean(
            hw in 1usize..8, hh in 1usize..8, seed in any::<u64>()
        ) {
            let (w, h) = (hw * 4, hh * 4);
            let mut s = seed;
            let p = Plane::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 56) as f64
            });
            let q = downsample_half(&downsample_half(&p).unwrap()).unwrap();
            prop_assert_eq!((q.width(), q.height()), (w / 4, h / 4));
            prop_assert!((q.mean() - p.mean()).abs() < 1e-6);
        }
    }
}
