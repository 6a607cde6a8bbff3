//! Feature vectors and the global / patch-averaged local channels.
//!
//! A global vector is `LD (12) ⊕ CA (10) ⊕ ON (120)`:
//!
//! | index    | block |
//! |----------|-------|
//! | 0..5     | five statistics of the luma plane |
//! | 5..10    | five statistics of the Sobel magnitude of the CSF-filtered luma |
//! | 10, 11   | mean local deviation, mean normalized local deviation |
//! | 12..17   | five statistics of Cb |
//! | 17..22   | five statistics of Cr |
//! | 22..142  | naturalness block (see [`crate::naturalness`]) |
//!
//! Five statistics are always ordered mean, std, median, mode, entropy.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{Plane, YCbCrImage, MIN_IMAGE_SIDE};
use crate::naturalness::on_features;
use crate::scalar::Real;
use crate::stats::five_stats;
use crate::structure::{csf_filter, gradient_magnitude, local_moments, CsfParams, LocalMomentConfig};

pub const LD_LEN: usize = 12;
pub const CA_LEN: usize = 10;
pub const FEATURE_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Schema {
    #[serde(rename = "LDCA-22")]
    Ldca22,
    #[serde(rename = "ON-120")]
    On120,
    #[serde(rename = "GLOBAL-142")]
    Global142,
    #[serde(rename = "NRBP-284")]
    Nrbp284,
}

impl Schema {
    pub const fn len(self) -> usize {
        match self {
            Schema::Ldca22 => 22,
            Schema::On120 => 120,
            Schema::Global142 => 142,
            Schema::Nrbp284 => 284,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Schema::Ldca22 => "LDCA-22",
            Schema::On120 => "ON-120",
            Schema::Global142 => "GLOBAL-142",
            Schema::Nrbp284 => "NRBP-284",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Schema::Ldca22, Schema::On120, Schema::Global142, Schema::Nrbp284]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown feature schema {s:?}")))
    }
}

/// Ordered, finite feature values tagged with their schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    schema: Schema,
    values: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct FeatureFile<T> {
    schema: Schema,
    version: u32,
    values: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    pub fn new(schema: Schema, values: Vec<T>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{schema} needs {} values, got {}",
                schema.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{schema} value {i} is not finite")));
        }
        Ok(FeatureVector { schema, values })
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FeatureFile {
            schema: self.schema,
            version: FEATURE_FILE_VERSION,
            values: self.values.clone(),
        })
        .expect("feature vectors serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FeatureFile<T> =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.version != FEATURE_FILE_VERSION {
            return Err(Error::Version {
                expected: FEATURE_FILE_VERSION.to_string(),
                found: file.version.to_string(),
            });
        }
        FeatureVector::new(file.schema, file.values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig<T> {
    /// Side of the square tiles of the local channel.
    pub patch_size: usize,
    pub csf: CsfParams<T>,
    pub local_moment: LocalMomentConfig<T>,
}

impl<T: Real> Default for ChannelConfig<T> {
    fn default() -> Self {
        ChannelConfig {
            patch_size: 32,
            csf: CsfParams::default(),
            local_moment: LocalMomentConfig::default(),
        }
    }
}

impl<T: Real> ChannelConfig<T> {
    pub fn with_ppd(ppd: T) -> Self {
        ChannelConfig {
            csf: CsfParams::with_ppd(ppd),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < MIN_IMAGE_SIDE {
            return Err(Error::Config(format!(
                "patch size {} is below {MIN_IMAGE_SIDE}",
                self.patch_size
            )));
        }
        self.csf.validate()?;
        self.local_moment.validate()
    }
}

/// Luminance discrimination: luma statistics, CSF-weighted gradient
/// statistics, and mean local deviation / normalized deviation.
pub fn ld_features<T: Real>(y: &Plane<T>, cfg: &ChannelConfig<T>) -> Result<[T; LD_LEN]> {
    y.ensure_min_size(MIN_IMAGE_SIDE, MIN_IMAGE_SIDE)?;
    let luma = five_stats(y);
    let grad = five_stats(&gradient_magnitude(&csf_filter(y, &cfg.csf)?)?);
    let moments = local_moments(y, &cfg.local_moment)?;
    let mut out = [T::zero(); LD_LEN];
    out[..5].copy_from_slice(&luma.to_array());
    out[5..10].copy_from_slice(&grad.to_array());
    out[10] = moments.sigma.mean();
    out[11] = moments.gamma.mean();
    Ok(out)
}

/// Color appearance: five statistics of Cb followed by those of Cr.
pub fn ca_features<T: Real>(cb: &Plane<T>, cr: &Plane<T>) -> Result<[T; CA_LEN]> {
    if (cb.width(), cb.height()) != (cr.width(), cr.height()) {
        return Err(Error::Dimension("Cb and Cr planes differ in size".into()));
    }
    let mut out = [T::zero(); CA_LEN];
    out[..5].copy_from_slice(&five_stats(cb).to_array());
    out[5..].copy_from_slice(&five_stats(cr).to_array());
    Ok(out)
}

/// `LD ⊕ CA` of an image, the 22-value block sent alongside the naturalness block.
pub fn ldca_features<T: Real>(img: &YCbCrImage<T>, cfg: &ChannelConfig<T>) -> Result<FeatureVector<T>> {
    let mut values = Vec::with_capacity(Schema::Ldca22.len());
    values.extend(ld_features(&img.y, cfg)?);
    values.extend(ca_features(&img.cb, &img.cr)?);
    FeatureVector::new(Schema::Ldca22, values)
}

pub fn global_features<T: Real>(img: &YCbCrImage<T>, cfg: &ChannelConfig<T>) -> Result<FeatureVector<T>> {
    cfg.validate()?;
    img.ensure_min_size(MIN_IMAGE_SIDE)?;
    let mut values = ldca_features(img, cfg)?.into_values();
    values.extend(on_features(img, &cfg.local_moment)?.into_values());
    FeatureVector::new(Schema::Global142, values)
}

/// Mean of the global vectors of all complete, non-overlapping
/// `patch_size` tiles anchored at the top-left corner.
pub fn local_features<T: Real>(img: &YCbCrImage<T>, cfg: &ChannelConfig<T>) -> Result<FeatureVector<T>> {
    cfg.validate()?;
    let side = cfg.patch_size;
    let (rows, cols) = (img.height() / side, img.width() / side);
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!(
            "{}x{} image holds no {side}x{side} patch",
            img.width(),
            img.height()
        )));
    }
    let tiles: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
    let per_tile = tiles
        .par_iter()
        .map(|&(r, c)| global_features(&img.crop(r * side, c * side, side, side)?, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut sum = vec![T::zero(); Schema::Global142.len()];
    for fv in &per_tile {
        for (acc, &v) in sum.iter_mut().zip(fv.values()) {
            *acc += v;
        }
    }
    let count = T::from_usize_lossy(per_tile.len());
    FeatureVector::new(Schema::Global142, sum.into_iter().map(|s| s / count).collect())
}

/// Number of tiles the local channel averages over.
pub fn tile_count(width: usize, height: usize, patch_size: usize) -> usize {
    (width / patch_size) * (height / patch_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_image(w: usize, h: usize, seed: u64) -> YCbCrImage<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rgb: Vec<u8> = (0..w * h * 3).map(|_| rng.gen_range(40..220)).collect();
        YCbCrImage::from_rgb8(w, h, &rgb).unwrap()
    }

    #[test]
    fn schema_strings_round_trip() {
        for s in [Schema::Ldca22, Schema::On120, Schema::Global142, Schema::Nrbp284] {
            assert_eq!(s.as_str().parse::<Schema>().unwrap(), s);
        }
        assert!("LDCA-21".parse::<Schema>().is_err());
    }

    #[test]
    fn feature_vector_rejects_bad_values() {
        assert!(matches!(
            FeatureVector::new(Schema::Ldca22, vec![0.0f64; 21]),
            Err(Error::Schema(_))
        ));
        let mut v = vec![0.0f64; 22];
        v[3] = f64::NAN;
        assert!(matches!(FeatureVector::new(Schema::Ldca22, v), Err(Error::Data(_))));
    }

    #[test]
    fn feature_json_round_trip() {
        let fv = FeatureVector::new(Schema::Ldca22, (0..22).map(|i| i as f64 / 7.0).collect()).unwrap();
        let json = fv.to_json();
        assert!(json.contains("\"schema\": \"LDCA-22\""));
        assert_eq!(FeatureVector::<f64>::from_json(&json).unwrap(), fv);
        let bumped = json.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            FeatureVector::<f64>::from_json(&bumped),
            Err(Error::Version { .. })
        ));
    }

    #[test]
    fn ld_of_constant_plane() {
        let ld = ld_features(&Plane::filled(20, 20, 100.0f64), &ChannelConfig::default()).unwrap();
        assert_eq!(&ld[..5], &[100.0, 0.0, 100.0, 100.0, 0.0]);
        for (i, v) in ld[5..].iter().enumerate() {
            assert!(v.abs() < 1e-9, "index {} = {v}", i + 5);
        }
    }

    #[test]
    fn ld_row_permutation_keeps_mean_std() {
        let img = noise_image(32, 32, 8);
        let swapped = Plane::from_fn(32, 32, |r, c| img.y.get(31 - r, c));
        let cfg = ChannelConfig::default();
        let (a, b) = (ld_features(&img.y, &cfg).unwrap(), ld_features(&swapped, &cfg).unwrap());
        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        // reflect padding mirrors exactly under a full row reversal
        assert!((a[10] - b[10]).abs() < 1e-9 && (a[11] - b[11]).abs() < 1e-9);
    }

    #[test]
    fn ca_examples() {
        let neutral = Plane::filled(16, 16, 128.0f64);
        let ca = ca_features(&neutral, &neutral).unwrap();
        assert_eq!(ca, [128.0, 0.0, 128.0, 128.0, 0.0, 128.0, 0.0, 128.0, 128.0, 0.0]);

        let img = noise_image(16, 16, 1);
        let a = ca_features(&img.cb, &img.cr).unwrap();
        let b = ca_features(&img.cr, &img.cb).unwrap();
        assert_eq!(&a[..5], &b[5..]);
        assert_eq!(&a[5..], &b[..5]);
        assert!(ca_features(&neutral, &Plane::filled(16, 17, 0.0)).is_err());
    }

    #[test]
    fn global_length_and_grayscale_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gray: Vec<u8> = (0..48 * 40).map(|_| rng.gen()).collect();
        let img = YCbCrImage::<f64>::from_gray8(48, 40, &gray).unwrap();
        let g = global_features(&img, &ChannelConfig::default()).unwrap();
        assert_eq!(g.values().len(), 142);
        assert_eq!(
            &g.values()[12..22],
            &[128.0, 0.0, 128.0, 128.0, 0.0, 128.0, 0.0, 128.0, 128.0, 0.0]
        );
        assert_eq!(g, global_features(&img, &ChannelConfig::default()).unwrap());
    }

    #[test]
    fn single_patch_local_equals_global() {
        let img = noise_image(32, 32, 5);
        let cfg = ChannelConfig::default();
        assert_eq!(local_features(&img, &cfg).unwrap(), global_features(&img, &cfg).unwrap());
    }

    #[test]
    fn repeated_tiles_average_to_the_tile() {
        let tile = noise_image(32, 32, 9);
        let big = Plane::from_fn(64, 64, |r, c| tile.y.get(r % 32, c % 32));
        let cb = Plane::from_fn(64, 64, |r, c| tile.cb.get(r % 32, c % 32));
        let cr = Plane::from_fn(64, 64, |r, c| tile.cr.get(r % 32, c % 32));
        let img = YCbCrImage::new(big, cb, cr, "").unwrap();
        let cfg = ChannelConfig::default();
        let local = local_features(&img, &cfg).unwrap();
        let single = global_features(&tile, &cfg).unwrap();
        for (a, b) in local.values().iter().zip(single.values()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn tiles_and_errors() {
        assert_eq!(tile_count(100, 100, 32), 9);
        let small = noise_image(24, 40, 3);
        assert!(matches!(
            local_features(&small, &ChannelConfig::default()),
            Err(Error::Dimension(_))
        ));
        let cfg = ChannelConfig::<f64> {
            patch_size: 8,
            ..Default::default()
        };
        assert!(matches!(global_features(&small, &cfg), Err(Error::Config(_))));
    }
}
