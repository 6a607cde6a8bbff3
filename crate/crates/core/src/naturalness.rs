//! Divisive normalization (MSCN), neighbour products, and moment-matching
//! fits of generalized Gaussian families, assembled into the 120-value
//! naturalness block.
//!
//! Block layout, 20 values per channel and scale, ordered Y-full, Y-half,
//! Cb-full, Cb-half, Cr-full, Cr-half:
//!
//! | offset | value |
//! |--------|-------|
//! | 0..4   | GGD of MSCN: shape, scale, skewness, kurtosis |
//! | 4..8   | AGGD of horizontal products: delta, shape, left variance, right variance |
//! | 8..12  | AGGD of vertical products |
//! | 12..16 | AGGD of main-diagonal products |
//! | 16..20 | AGGD of anti-diagonal products |

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Schema};
use crate::imageio::{downsample_half, Plane, YCbCrImage};
use crate::scalar::Real;
use crate::structure::{local_moments, LocalMomentConfig};

pub const MIN_FIT_SAMPLES: usize = 64;
pub const SHAPE_MIN: f64 = 0.05;
pub const SHAPE_MAX: f64 = 10.0;
pub const SHAPE_STEP: f64 = 0.001;

/// Values per channel-scale: 4 GGD values plus 4 orientations of 4 AGGD values.
pub const VALUES_PER_SCALE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgdFit<T> {
    pub shape: T,
    pub scale: T,
    pub skewness: T,
    pub kurtosis: T,
}

impl<T: Real> GgdFit<T> {
    /// Gaussian-point stand-in for fits on flat data.
    pub fn sentinel() -> Self {
        GgdFit {
            shape: T::lit(2.0),
            scale: T::zero(),
            skewness: T::zero(),
            kurtosis: T::lit(3.0),
        }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.shape, self.scale, self.skewness, self.kurtosis]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggdFit<T> {
    pub delta: T,
    pub shape: T,
    pub var_left: T,
    pub var_right: T,
}

impl<T: Real> AggdFit<T> {
    pub fn sentinel() -> Self {
        AggdFit {
            delta: T::zero(),
            shape: T::lit(2.0),
            var_left: T::zero(),
            var_right: T::zero(),
        }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.delta, self.shape, self.var_left, self.var_right]
    }
}

/// `ln Γ(1/λ) + ln Γ(3/λ) - 2 ln Γ(2/λ)`; `exp` of it equals `E[x²] / E[|x|]²`
/// for a zero-mean generalized Gaussian of shape `λ`.
fn ln_moment_ratio(shape: f64) -> f64 {
    ln_gamma(1.0 / shape) + ln_gamma(3.0 / shape) - 2.0 * ln_gamma(2.0 / shape)
}

struct ShapeGrid {
    shapes: Vec<f64>,
    /// Strictly decreasing in shape.
    ratios: Vec<f64>,
}

fn shape_grid() -> &'static ShapeGrid {
    static GRID: OnceLock<ShapeGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let (lo, hi) = ((SHAPE_MIN / SHAPE_STEP).round() as usize, (SHAPE_MAX / SHAPE_STEP).round() as usize);
        let shapes: Vec<f64> = (lo..=hi).map(|i| i as f64 / (1.0 / SHAPE_STEP).round()).collect();
        let ratios = shapes.iter().map(|&s| ln_moment_ratio(s).exp()).collect();
        ShapeGrid { shapes, ratios }
    })
}

/// Grid shape whose moment ratio is nearest to `ratio`.
pub fn shape_from_ratio(ratio: f64) -> f64 {
    let g = shape_grid();
    // first index whose ratio is <= target
    let idx = g.ratios.partition_point(|&r| r > ratio);
    if idx == 0 {
        return g.shapes[0];
    }
    if idx == g.ratios.len() {
        return g.shapes[idx - 1];
    }
    if (g.ratios[idx - 1] - ratio).abs() <= (ratio - g.ratios[idx]).abs() {
        g.shapes[idx - 1]
    } else {
        g.shapes[idx]
    }
}

fn check_samples<T: Real>(samples: &[T]) -> Result<()> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite sample".into()));
    }
    let (lo, hi) = samples
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return Err(Error::Degenerate(format!("all {} samples equal {lo}", samples.len())));
    }
    Ok(())
}

/// Symmetric generalized Gaussian fit by moment matching.
pub fn fit_ggd<T: Real>(samples: &[T]) -> Result<GgdFit<T>> {
    check_samples(samples)?;
    let n = T::from_usize_lossy(samples.len());
    let abs_mean = samples.iter().map(|v| v.abs()).sum::<T>() / n;
    let sq_mean = samples.iter().map(|&v| v * v).sum::<T>() / n;
    let shape = shape_from_ratio((sq_mean / (abs_mean * abs_mean)).as_f64());
    let scale = (sq_mean.as_f64() * (ln_gamma(1.0 / shape) - ln_gamma(3.0 / shape)).exp()).sqrt();

    let mean = samples.iter().copied().sum::<T>() / n;
    let (mut c2, mut c3, mut c4) = (T::zero(), T::zero(), T::zero());
    for &v in samples {
        let d = v - mean;
        let d2 = d * d;
        c2 += d2;
        c3 += d2 * d;
        c4 += d2 * d2;
    }
    let (c2, c3, c4) = (c2 / n, c3 / n, c4 / n);
    Ok(GgdFit {
        shape: T::lit(shape),
        scale: T::lit(scale),
        skewness: c3 / (c2 * c2.sqrt()),
        kurtosis: c4 / (c2 * c2),
    })
}

/// Asymmetric generalized Gaussian fit: side scales from the RMS of each
/// sign, shape from the asymmetry-corrected moment ratio.
pub fn fit_aggd<T: Real>(samples: &[T]) -> Result<AggdFit<T>> {
    check_samples(samples)?;
    let (mut left_sq, mut left_n) = (T::zero(), 0usize);
    let (mut right_sq, mut right_n) = (T::zero(), 0usize);
    let (mut abs_sum, mut sq_sum) = (T::zero(), T::zero());
    for &v in samples {
        let sq = v * v;
        if v < T::zero() {
            left_sq += sq;
            left_n += 1;
        } else if v > T::zero() {
            right_sq += sq;
            right_n += 1;
        }
        abs_sum += v.abs();
        sq_sum += sq;
    }
    if left_n == 0 || right_n == 0 {
        return Err(Error::Support(format!(
            "{left_n} negative and {right_n} positive samples"
        )));
    }
    let var_left = left_sq / T::from_usize_lossy(left_n);
    let var_right = right_sq / T::from_usize_lossy(right_n);
    let (rho_l, rho_r) = (var_left.sqrt(), var_right.sqrt());

    let n = T::from_usize_lossy(samples.len());
    let g = (rho_l / rho_r).as_f64();
    let abs_mean = (abs_sum / n).as_f64();
    let r_hat = abs_mean * abs_mean / (sq_sum / n).as_f64();
    let big_r = r_hat * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2);
    let shape = shape_from_ratio(1.0 / big_r);
    let mean_factor = (ln_gamma(2.0 / shape) - ln_gamma(1.0 / shape)).exp();

    Ok(AggdFit {
        delta: (rho_r - rho_l) * T::lit(mean_factor),
        shape: T::lit(shape),
        var_left,
        var_right,
    })
}

/// Mean-subtracted, contrast-normalized coefficients `(p - μ) / (σ + C)`.
pub fn mscn<T: Real>(p: &Plane<T>, cfg: &LocalMomentConfig<T>) -> Result<Plane<T>> {
    let m = local_moments(p, cfg)?;
    let data = p
        .samples()
        .iter()
        .zip(m.mu.samples())
        .zip(m.sigma.samples())
        .map(|((&x, &mu), &s)| (x - mu) / (s + cfg.c_stab))
        .collect();
    Plane::new(p.width(), p.height(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedProducts<T> {
    pub horizontal: Plane<T>,
    pub vertical: Plane<T>,
    pub main_diagonal: Plane<T>,
    pub anti_diagonal: Plane<T>,
}

impl<T: Real> PairedProducts<T> {
    pub fn planes(&self) -> [&Plane<T>; 4] {
        [&self.horizontal, &self.vertical, &self.main_diagonal, &self.anti_diagonal]
    }
}

/// Products of each coefficient with its right, lower, lower-right and
/// lower-left neighbour.
pub fn paired_products<T: Real>(m: &Plane<T>) -> Result<PairedProducts<T>> {
    m.ensure_min_size(2, 2)?;
    let (w, h) = (m.width(), m.height());
    Ok(PairedProducts {
        horizontal: Plane::from_fn(w - 1, h, |r, c| m.get(r, c) * m.get(r, c + 1)),
        vertical: Plane::from_fn(w, h - 1, |r, c| m.get(r, c) * m.get(r + 1, c)),
        main_diagonal: Plane::from_fn(w - 1, h - 1, |r, c| m.get(r, c) * m.get(r + 1, c + 1)),
        anti_diagonal: Plane::from_fn(w - 1, h - 1, |r, c| m.get(r, c + 1) * m.get(r + 1, c)),
    })
}

/// The 20 naturalness values of one plane at one scale.
fn scale_features<T: Real>(p: &Plane<T>, cfg: &LocalMomentConfig<T>, label: &str) -> Result<Vec<T>> {
    let coeffs = mscn(p, cfg)?;
    let mut out = Vec::with_capacity(VALUES_PER_SCALE);
    let ggd = fit_ggd(coeffs.samples()).unwrap_or_else(|e| {
        log::warn!("{label}: GGD fit replaced by sentinel ({e})");
        GgdFit::sentinel()
    });
    out.extend(ggd.to_array());
    let products = paired_products(&coeffs)?;
    for (plane, dir) in products.planes().into_iter().zip(["h", "v", "d1", "d2"]) {
        let fit = fit_aggd(plane.samples()).unwrap_or_else(|e| {
            log::warn!("{label}/{dir}: AGGD fit replaced by sentinel ({e})");
            AggdFit::sentinel()
        });
        out.extend(fit.to_array());
    }
    Ok(out)
}

/// 120-value naturalness block over Y, Cb, Cr at full and half resolution.
pub fn on_features<T: Real>(img: &YCbCrImage<T>, cfg: &LocalMomentConfig<T>) -> Result<FeatureVector<T>> {
    img.ensure_min_size(crate::imageio::MIN_IMAGE_SIDE)?;
    let mut values = Vec::with_capacity(Schema::On120.len());
    for (plane, name) in [(&img.y, "Y"), (&img.cb, "Cb"), (&img.cr, "Cr")] {
        values.extend(scale_features(plane, cfg, &format!("{name}-full"))?);
        let half = downsample_half(plane)?;
        values.extend(scale_features(&half, cfg, &format!("{name}-half"))?);
    }
    FeatureVector::new(Schema::On120, values)
}
