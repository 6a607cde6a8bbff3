//! Contrast-sensitivity weighting in the frequency domain, gradient maps and
//! Gaussian-windowed local moments.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{reflect_index, Plane, MIN_IMAGE_SIDE};
use crate::scalar::Real;

/// Offset of the band-pass CSF numerator; the peak sits where `eta * f = 1 - OFFSET`.
const CSF_OFFSET: f64 = 0.0192;
const CSF_GAIN: f64 = 2.6;
/// Sensitivity assigned below the peak frequency.
pub const CSF_LOW_FREQ_GAIN: f64 = 0.981;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsfParams<T> {
    /// Gaussian cutoff, applied to frequencies in cycles/pixel.
    pub alpha: T,
    pub eta: T,
    /// Pixels per degree of visual angle.
    pub ppd: T,
}

impl<T: Real> Default for CsfParams<T> {
    fn default() -> Self {
        CsfParams {
            alpha: T::lit(0.5),
            eta: T::lit(0.114),
            ppd: T::lit(32.0),
        }
    }
}

impl<T: Real> CsfParams<T> {
    pub fn with_ppd(ppd: T) -> Self {
        CsfParams {
            ppd,
            ..Self::default()
        }
    }

    /// Maximizer of `(0.0192 + eta f) exp(-eta f)`.
    pub fn f_peak(&self) -> T {
        (T::one() - T::lit(CSF_OFFSET)) / self.eta
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        if !(ok(self.alpha) && ok(self.eta) && ok(self.ppd)) {
            return Err(Error::Config(format!(
                "CSF parameters must be positive (alpha {}, eta {}, ppd {})",
                self.alpha, self.eta, self.ppd
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalMomentConfig<T> {
    /// Odd side length of the Gaussian window.
    pub window: usize,
    pub sigma_w: T,
    /// Stabilizing constant added to denominators.
    pub c_stab: T,
}

impl<T: Real> Default for LocalMomentConfig<T> {
    fn default() -> Self {
        LocalMomentConfig {
            window: 7,
            sigma_w: T::lit(7.0 / 6.0),
            c_stab: T::one(),
        }
    }
}

impl<T: Real> LocalMomentConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if !(self.sigma_w > T::zero() && self.c_stab > T::zero()) {
            return Err(Error::Config("sigma_w and c_stab must be positive".into()));
        }
        Ok(())
    }

    /// Unit-sum Gaussian weights, row-major `window x window`.
    pub fn weights(&self) -> Vec<T> {
        let r = (self.window / 2) as isize;
        let two_s2 = T::lit(2.0) * self.sigma_w * self.sigma_w;
        let mut w: Vec<T> = (-r..=r)
            .flat_map(|i| (-r..=r).map(move |j| (i, j)))
            .map(|(i, j)| (-T::lit((i * i + j * j) as f64) / two_s2).exp())
            .collect();
        let total: T = w.iter().copied().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }
}

/// Product of the Gaussian cutoff (in cycles/pixel) and the orientation
/// corrected band-pass CSF (in cycles/degree).
pub fn csf_transfer<T: Real>(f_cpd: T, f_cpp: T, phi: T, params: &CsfParams<T>) -> T {
    let two_pi2 = T::lit(2.0) * T::PI() * T::PI();
    let h1 = (-two_pi2 * params.alpha * params.alpha * f_cpp * f_cpp).exp();
    let f_phi = f_cpd / (T::lit(0.15) * (T::lit(4.0) * phi).cos() + T::lit(0.85));
    let h2 = if f_phi >= params.f_peak() {
        let ef = params.eta * f_phi;
        T::lit(CSF_GAIN) * (T::lit(CSF_OFFSET) + ef) * (-ef).exp()
    } else {
        T::lit(CSF_LOW_FREQ_GAIN)
    };
    h1 * h2
}

/// Signed frequency index of DFT bin `k` of an `n`-point transform.
#[inline]
pub(crate) fn wrap_bin(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Transfer value for DFT bin (`k` row frequency, `l` column frequency).
pub(crate) fn csf_bin_gain<T: Real>(k: usize, l: usize, height: usize, width: usize, params: &CsfParams<T>) -> T {
    let u = T::lit(wrap_bin(k, height) as f64) / T::from_usize_lossy(height);
    let v = T::lit(wrap_bin(l, width) as f64) / T::from_usize_lossy(width);
    let f_cpp = (u * u + v * v).sqrt();
    csf_transfer(f_cpp * params.ppd, f_cpp, u.atan2(v), params)
}

/// Multiplies the 2-D spectrum of `p` by the CSF and returns the real part of
/// the inverse transform.
pub fn csf_filter<T: Real>(p: &Plane<T>, params: &CsfParams<T>) -> Result<Plane<T>> {
    p.ensure_min_size(MIN_IMAGE_SIDE, MIN_IMAGE_SIDE)?;
    params.validate()?;
    let (w, h) = (p.width(), p.height());
    let mut planner = FftPlanner::<T>::new();

    let mut buf: Vec<Complex<T>> = p.samples().iter().map(|&v| Complex::new(v, T::zero())).collect();
    let mut col = vec![Complex::new(T::zero(), T::zero()); h];

    fft_2d(&mut planner, &mut buf, &mut col, w, h, false);
    for k in 0..h {
        for l in 0..w {
            buf[k * w + l] = buf[k * w + l] * csf_bin_gain(k, l, h, w, params);
        }
    }
    fft_2d(&mut planner, &mut buf, &mut col, w, h, true);

    let norm = T::from_usize_lossy(w * h);
    Plane::new(w, h, buf.iter().map(|c| c.re / norm).collect())
}

fn fft_2d<T: Real>(
    planner: &mut FftPlanner<T>,
    buf: &mut [Complex<T>],
    col: &mut [Complex<T>],
    w: usize,
    h: usize,
    inverse: bool,
) {
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row_fft.process(buf);
    for c in 0..w {
        for r in 0..h {
            col[r] = buf[r * w + c];
        }
        col_fft.process(col);
        for r in 0..h {
            buf[r * w + c] = col[r];
        }
    }
}

/// Sobel gradient magnitude with mirrored borders.
pub fn gradient_magnitude<T: Real>(p: &Plane<T>) -> Result<Plane<T>> {
    p.ensure_min_size(3, 3)?;
    let (w, h) = (p.width(), p.height());
    let at = |r: isize, c: isize| p.get(reflect_index(r, h), reflect_index(c, w));
    let two = T::lit(2.0);
    Ok(Plane::from_fn(w, h, |r, c| {
        let (r, c) = (r as isize, c as isize);
        let gx = (at(r - 1, c + 1) + two * at(r, c + 1) + at(r + 1, c + 1))
            - (at(r - 1, c - 1) + two * at(r, c - 1) + at(r + 1, c - 1));
        let gy = (at(r + 1, c - 1) + two * at(r + 1, c) + at(r + 1, c + 1))
            - (at(r - 1, c - 1) + two * at(r - 1, c) + at(r - 1, c + 1));
        (gx * gx + gy * gy).sqrt()
    }))
}

/// Local mean, local standard deviation and normalized deviation maps.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMoments<T> {
    pub mu: Plane<T>,
    pub sigma: Plane<T>,
    pub gamma: Plane<T>,
}

pub fn local_moments<T: Real>(p: &Plane<T>, cfg: &LocalMomentConfig<T>) -> Result<LocalMoments<T>> {
    cfg.validate()?;
    let (w, h) = (p.width(), p.height());
    if w <= cfg.window || h <= cfg.window {
        return Err(Error::Dimension(format!(
            "{w}x{h} plane must exceed the {0}x{0} window",
            cfg.window
        )));
    }
    let weights = cfg.weights();
    let side = cfg.window;
    let rad = (side / 2) as isize;
    let row_idx: Vec<Vec<usize>> = (0..h as isize)
        .map(|r| (-rad..=rad).map(|d| reflect_index(r + d, h)).collect())
        .collect();
    let col_idx: Vec<Vec<usize>> = (0..w as isize)
        .map(|c| (-rad..=rad).map(|d| reflect_index(c + d, w)).collect())
        .collect();

    let mut mu = Vec::with_capacity(w * h);
    let mut sigma = Vec::with_capacity(w * h);
    let mut gamma = Vec::with_capacity(w * h);
    let samples = p.samples();
    for r in 0..h {
        for c in 0..w {
            let center = samples[r * w + c];
            // offsets from the center keep flat neighbourhoods exactly flat
            let mut acc = T::zero();
            for (i, &rr) in row_idx[r].iter().enumerate() {
                let wrow = &weights[i * side..(i + 1) * side];
                let srow = &samples[rr * w..(rr + 1) * w];
                for (j, &cc) in col_idx[c].iter().enumerate() {
                    acc += wrow[j] * (srow[cc] - center);
                }
            }
            let m = center + acc;
            let mut var = T::zero();
            for (i, &rr) in row_idx[r].iter().enumerate() {
                let wrow = &weights[i * side..(i + 1) * side];
                let srow = &samples[rr * w..(rr + 1) * w];
                for (j, &cc) in col_idx[c].iter().enumerate() {
                    let d = srow[cc] - m;
                    var += wrow[j] * d * d;
                }
            }
            let s = var.sqrt();
            mu.push(m);
            sigma.push(s);
            gamma.push(s / (m + cfg.c_stab));
        }
    }
    Ok(LocalMoments {
        mu: Plane::new(w, h, mu)?,
        sigma: Plane::new(w, h, sigma)?,
        gamma: Plane::new(w, h, gamma)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn lcg_plane(w: usize, h: usize, seed: u64) -> Plane<f64> {
        let mut s = seed;
        Plane::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 40) % 256) as f64
        })
    }

    /// O((MN)^2) DFT filter used as an oracle for the FFT path.
    fn direct_dft_filter(p: &Plane<f64>, gain: impl Fn(usize, usize) -> f64) -> Plane<f64> {
        let (w, h) = (p.width(), p.height());
        let mut spec = vec![Complex::new(0.0, 0.0); w * h];
        for k in 0..h {
            for l in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for r in 0..h {
                    for c in 0..w {
                        let ang = -2.0 * PI * ((k * r) as f64 / h as f64 + (l * c) as f64 / w as f64);
                        acc += Complex::from_polar(p.get(r, c), ang);
                    }
                }
                spec[k * w + l] = acc * gain(k, l);
            }
        }
        Plane::from_fn(w, h, |r, c| {
            let mut acc = Complex::new(0.0, 0.0);
            for k in 0..h {
                for l in 0..w {
                    let ang = 2.0 * PI * ((k * r) as f64 / h as f64 + (l * c) as f64 / w as f64);
                    acc += spec[k * w + l] * Complex::from_polar(1.0, ang);
                }
            }
            acc.re / (w * h) as f64
        })
    }

    fn rms(a: &Plane<f64>, b: &Plane<f64>) -> f64 {
        let s: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y) * (x - y)).sum();
        (s / a.len() as f64).sqrt()
    }

    #[test]
    fn dc_gain_and_peak() {
        let prm = CsfParams::<f64>::default();
        assert_eq!(csf_transfer(0.0, 0.0, 1.234, &prm), 0.981);
        assert!((prm.f_peak() - 8.603_508_771_929_825).abs() < 1e-9);
        let v = csf_transfer(20.0, 0.0, 0.0, &prm);
        assert!((v - 0.611_45).abs() < 1e-4, "{v}");
    }

    #[test]
    fn peak_is_maximizer_of_band_pass() {
        let prm = CsfParams::<f64>::default();
        let g = |f: f64| (CSF_OFFSET + prm.eta * f) * (-prm.eta * f).exp();
        let fp = prm.f_peak();
        let h = 1e-4;
        let deriv = (g(fp + h) - g(fp - h)) / (2.0 * h);
        assert!(deriv.abs() < 1e-9);
        assert!(g(fp) > g(fp - 0.5) && g(fp) > g(fp + 0.5));
    }

    #[test]
    fn constant_plane_scales_by_dc_gain() {
        let p = Plane::filled(20, 16, 100.0f64);
        let out = csf_filter(&p, &CsfParams::default()).unwrap();
        assert!(out.samples().iter().all(|&v| (v - 98.1).abs() < 1e-9));
    }

    #[test]
    fn impulse_sums_to_dc_gain() {
        let mut p = Plane::filled(16, 16, 0.0f64);
        p = Plane::from_fn(16, 16, |r, c| if (r, c) == (5, 9) { 1.0 } else { p.get(r, c) });
        let out = csf_filter(&p, &CsfParams::default()).unwrap();
        let total: f64 = out.samples().iter().sum();
        assert!((total - 0.981).abs() < 1e-6);
        let prm = CsfParams::default();
        let oracle = direct_dft_filter(&p, |k, l| csf_bin_gain(k, l, 16, 16, &prm));
        assert!(rms(&out, &oracle) < 1e-6);
    }

    #[test]
    fn fft_matches_direct_dft_non_square() {
        let p = lcg_plane(18, 16, 3);
        let prm = CsfParams::default();
        let out = csf_filter(&p, &prm).unwrap();
        let oracle = direct_dft_filter(&p, |k, l| csf_bin_gain(k, l, 16, 18, &prm));
        assert!(rms(&out, &oracle) < 1e-6);
    }

    #[test]
    fn filtering_twice_equals_squared_transfer() {
        let p = lcg_plane(16, 16, 11);
        let prm = CsfParams::default();
        let twice = csf_filter(&csf_filter(&p, &prm).unwrap(), &prm).unwrap();
        let oracle = direct_dft_filter(&p, |k, l| csf_bin_gain(k, l, 16, 16, &prm).powi(2));
        assert!(rms(&twice, &oracle) < 1e-6);
    }

    #[test]
    fn csf_filter_rejects_small_planes() {
        assert!(matches!(
            csf_filter(&Plane::filled(15, 40, 0.0f64), &CsfParams::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn gradient_of_constant_and_ramp() {
        let g = gradient_magnitude(&Plane::filled(5, 5, 3.0f64)).unwrap();
        assert!(g.samples().iter().all(|&v| v == 0.0));
        let ramp = Plane::from_fn(8, 6, |_, c| c as f64);
        let g = gradient_magnitude(&ramp).unwrap();
        for r in 1..5 {
            for c in 1..7 {
                assert_eq!(g.get(r, c), 8.0);
            }
        }
        assert!(gradient_magnitude(&Plane::filled(2, 5, 0.0f64)).is_err());
    }

    #[test]
    fn gradient_commutes_with_transpose() {
        let p = lcg_plane(9, 7, 5);
        let a = gradient_magnitude(&p.transpose()).unwrap();
        let b = gradient_magnitude(&p).unwrap().transpose();
        assert_eq!(a, b);
    }

    #[test]
    fn local_moments_of_constant() {
        let m = local_moments(&Plane::filled(12, 12, 10.0f64), &LocalMomentConfig::default()).unwrap();
        assert!(m.mu.samples().iter().all(|&v| v == 10.0));
        assert!(m.sigma.samples().iter().all(|&v| v == 0.0));
        assert!(m.gamma.samples().iter().all(|&v| v == 0.0));
    }

    /// Windowed sums evaluated straight from the definition.
    fn brute_moments(p: &Plane<f64>, cfg: &LocalMomentConfig<f64>) -> (Plane<f64>, Plane<f64>) {
        let r = (cfg.window / 2) as isize;
        let s2 = 2.0 * cfg.sigma_w * cfg.sigma_w;
        let mut raw = Vec::new();
        for u in -r..=r {
            for v in -r..=r {
                raw.push((u, v, (-((u * u + v * v) as f64) / s2).exp()));
            }
        }
        let total: f64 = raw.iter().map(|t| t.2).sum();
        let (w, h) = (p.width(), p.height());
        let val = |y: isize, x: isize| p.get(reflect_index(y, h), reflect_index(x, w));
        let mu: Plane<f64> = Plane::from_fn(w, h, |y, x| {
            raw.iter()
                .map(|&(u, v, k)| k / total * val(y as isize + u, x as isize + v))
                .sum()
        });
        let sigma = Plane::from_fn(w, h, |y, x| {
            let m: f64 = mu.get(y, x);
            raw.iter()
                .map(|&(u, v, k)| k / total * (val(y as isize + u, x as isize + v) - m).powi(2))
                .sum::<f64>()
                .sqrt()
        });
        (mu, sigma)
    }

    #[test]
    fn local_moments_match_brute_force() {
        let cfg = LocalMomentConfig::default();
        let p = lcg_plane(16, 16, 42);
        let m = local_moments(&p, &cfg).unwrap();
        let (mu, sigma) = brute_moments(&p, &cfg);
        for i in 0..p.len() {
            assert!((m.mu.samples()[i] - mu.samples()[i]).abs() < 1e-9);
            assert!((m.sigma.samples()[i] - sigma.samples()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn checkerboard_interior_mean() {
        let p = Plane::from_fn(24, 24, |r, c| if (r + c) % 2 == 0 { 255.0 } else { 0.0 });
        let cfg = LocalMomentConfig::default();
        let m = local_moments(&p, &cfg).unwrap();
        let (oracle, _) = brute_moments(&p, &cfg);
        for r in 3..21 {
            for c in 3..21 {
                assert!((m.mu.get(r, c) - oracle.get(r, c)).abs() < 1e-9);
                // the window's own checker split leaves the mean near mid-gray
                assert!((m.mu.get(r, c) - 127.5).abs() < 0.5);
            }
        }
    }

    #[test]
    fn bad_window_config() {
        let p = Plane::filled(20, 20, 0.0f64);
        let even = LocalMomentConfig { window: 6, ..Default::default() };
        assert!(matches!(local_moments(&p, &even), Err(Error::Config(_))));
        assert!(matches!(
            local_moments(&Plane::filled(7, 20, 0.0f64), &LocalMomentConfig::default()),
            Err(Error::Dimension(_))
        ));
    }

    proptest! {
        #[test]
        fn csf_has_fourfold_symmetry(f in 0.0f64..60.0, phi in -PI..PI) {
            let prm = CsfParams::default();
            let a = csf_transfer(f, f / 32.0, phi, &prm);
            let b = csf_transfer(f, f / 32.0, phi + PI / 2.0, &prm);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a > 0.0 && a <= 1.05);
        }

        #[test]
        fn csf_decreases_beyond_peak(f in 8.7f64..80.0, df in 0.01f64..5.0, phi in -PI..PI) {
            let prm = CsfParams::default();
            prop_assert!(csf_transfer(f + df, 0.0, phi, &prm) < csf_transfer(f, 0.0, phi, &prm));
        }

        #[test]
        fn sigma_is_homogeneous(k in 0.0f64..4.0, seed in any::<u64>()) {
            let p = lcg_plane(12, 10, seed);
            let cfg = LocalMomentConfig::default();
            let a = local_moments(&p, &cfg).unwrap();
            let b = local_moments(&p.map(|v| v * k), &cfg).unwrap();
            for (x, y) in a.sigma.samples().iter().zip(b.sigma.samples()) {
                prop_assert!((x * k - y).abs() <= 1e-9 * (1.0 + x * k));
            }
        }
    }
}
