//! Mean, standard deviation, two-pass median, two-pass mode and histogram
//! entropy of a plane.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::imageio::Plane;
use crate::scalar::Real;

/// Number of histogram bins used by the mode and entropy statistics.
pub const HIST_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatVec5<T> {
    pub mea: T,
    pub std: T,
    pub med: T,
    pub mode: T,
    /// Bits, in `[0, 8]`.
    pub ent: T,
}

impl<T: Real> StatVec5<T> {
    pub fn to_array(&self) -> [T; 5] {
        [self.mea, self.std, self.med, self.mode, self.ent]
    }
}

pub fn five_stats<T: Real>(p: &Plane<T>) -> StatVec5<T> {
    let n = T::from_usize_lossy(p.len());
    let mea = p.samples().iter().copied().sum::<T>() / n;
    let var = p
        .samples()
        .iter()
        .map(|&v| (v - mea) * (v - mea))
        .sum::<T>()
        / n;

    let row_medians: Vec<T> = p.rows().map(|r| median(r.to_vec())).collect();
    let med = median(row_medians);

    let bins = histogram_bins(p);
    let row_modes: Vec<u8> = bins.chunks_exact(p.width()).map(mode_of).collect();
    let mode = mode_of(&row_modes);

    StatVec5 {
        mea,
        std: var.sqrt(),
        med,
        mode: T::lit(mode as f64),
        ent: T::lit(entropy_bits(&bins)),
    }
}

/// Middle element, or the mean of the two middle elements for even counts.
fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = v.len();
    // 1-based positions floor((n+1)/2) and ceil((n+1)/2)
    let lo = (n + 1) / 2 - 1;
    let hi = (n + 2) / 2 - 1;
    (v[lo] + v[hi]) * T::lit(0.5)
}

/// Most frequent bin; ties go to the smallest bin.
fn mode_of(bins: &[u8]) -> u8 {
    let mut counts = [0usize; HIST_BINS];
    for &b in bins {
        counts[b as usize] += 1;
    }
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best as u8
}

fn entropy_bits(bins: &[u8]) -> f64 {
    let mut counts = [0usize; HIST_BINS];
    for &b in bins {
        counts[b as usize] += 1;
    }
    let n = bins.len() as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let pk = c as f64 / n;
            -pk * pk.log2()
        })
        .sum();
    h.max(0.0)
}

/// 8-bit bin index of every sample: rounding for planes already inside
/// `[0, 255]`, min-max rescaling otherwise (constant planes land in bin 0).
pub(crate) fn histogram_bins<T: Real>(p: &Plane<T>) -> Vec<u8> {
    let (lo, hi) = p.min_max();
    let top = T::lit(255.0);
    if lo >= T::zero() && hi <= top {
        return p
            .samples()
            .iter()
            .map(|&v| v.round().to_u8().unwrap_or(0))
            .collect();
    }
    let span = hi - lo;
    if !(span > T::zero()) {
        return vec![0; p.len()];
    }
    p.samples()
        .iter()
        .map(|&v| {
            ((v - lo) / span * top)
                .round()
                .max(T::zero())
                .min(top)
                .to_u8()
                .unwrap_or(0)
        })
        .collect()
}

/// Plane of histogram bin indices feeding the mode and entropy statistics.
pub fn quantize_for_hist<T: Real>(p: &Plane<T>) -> Plane<T> {
    let data = histogram_bins(p)
        .into_iter()
        .map(|b| T::lit(b as f64))
        .collect();
    Plane::new(p.width(), p.height(), data).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plane(rows: &[&[f64]]) -> Plane<f64> {
        Plane::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Independent histogram: sort, count runs.
    fn entropy_oracle(values: &[f64]) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len() as f64;
        let mut h = 0.0;
        let mut i = 0;
        while i < v.len() {
            let j = v[i..].iter().take_while(|&&x| x == v[i]).count();
            let p = j as f64 / n;
            h -= p * p.log2();
            i += j;
        }
        h
    }

    #[test]
    fn constant_plane() {
        let s = five_stats(&Plane::filled(9, 7, 42.0f64));
        assert_eq!(s.to_array(), [42.0, 0.0, 42.0, 42.0, 0.0]);
    }

    #[test]
    fn two_by_two_example() {
        let s = five_stats(&plane(&[&[1.0, 2.0], &[3.0, 4.0]]));
        assert_eq!(s.mea, 2.5);
        assert!((s.std - 1.118_033_988_749_895).abs() < 1e-12);
        assert_eq!(s.med, 2.5);
        assert_eq!(s.mode, 1.0);
        assert_eq!(s.ent, 2.0);
    }

    #[test]
    fn uniform_histogram_has_eight_bits() {
        let p = Plane::from_fn(16, 16, |r, c| (r * 16 + c) as f64);
        assert_eq!(five_stats(&p).ent, 8.0);
    }

    #[test]
    fn odd_row_median_and_mode_ties() {
        // rows medians: 2, 5, 9 -> 5; row modes: 1 (all distinct), 5, 7 -> tie, smallest 1
        let p = plane(&[&[3.0, 1.0, 2.0], &[5.0, 5.0, 6.0], &[7.0, 9.0, 7.0]]);
        let s = five_stats(&p);
        assert_eq!(s.med, 5.0);
        assert_eq!(s.mode, 1.0);
    }

    #[test]
    fn quantize_examples() {
        let p = plane(&[&[0.0, 17.0], &[255.0, 3.0]]);
        assert_eq!(quantize_for_hist(&p), p);

        let wide = plane(&[&[0.0, 510.0], &[100.0, 301.0]]);
        let q = quantize_for_hist(&wide);
        assert_eq!(q.samples(), &[0.0, 255.0, 50.0, 151.0]);

        let neg = Plane::filled(4, 4, -3.7f64);
        assert!(quantize_for_hist(&neg).samples().iter().all(|&v| v == 0.0));
    }

    fn small_plane() -> impl Strategy<Value = Plane<f64>> {
        (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..=200, w * h)
                .prop_map(move |v| Plane::new(w, h, v.into_iter().map(f64::from).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn bounds_hold(p in small_plane()) {
            let s = five_stats(&p);
            let (lo, hi) = p.min_max();
            prop_assert!(s.std >= 0.0);
            prop_assert!(s.ent >= 0.0 && s.ent <= 8.0);
            prop_assert!(lo <= s.med && s.med <= hi);
            let q = quantize_for_hist(&p);
            let (qlo, qhi) = q.min_max();
            prop_assert!(qlo <= s.mode && s.mode <= qhi);
        }

        #[test]
        fn entropy_matches_oracle(p in small_plane()) {
            let q = quantize_for_hist(&p);
            let s = five_stats(&p);
            prop_assert!((s.ent - entropy_oracle(q.samples())).abs() < 1e-9);
        }

        #[test]
        fn shift_moves_location_stats(p in small_plane(), c in 0u8..=55) {
            let c = c as f64;
            let a = five_stats(&p);
            let b = five_stats(&p.map(|v| v + c));
            prop_assert!((b.mea - a.mea - c).abs() < 1e-9);
            prop_assert!((b.med - a.med - c).abs() < 1e-12);
            prop_assert_eq!(b.mode - a.mode, c);
            prop_assert!((b.std - a.std).abs() < 1e-9);
        }

        #[test]
        fn within_row_permutation_invariance(p in small_plane(), seed in any::<u64>()) {
            let mut rows: Vec<Vec<f64>> = p.rows().map(|r| r.to_vec()).collect();
            let mut s = seed;
            for row in rows.iter_mut() {
                for i in (1..row.len()).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                    row.swap(i, (s >> 33) as usize % (i + 1));
                }
            }
            rows.reverse();
            let q = Plane::from_rows(&rows).unwrap();
            let (a, b) = (five_stats(&p), five_stats(&q));
            prop_assert!((a.mea - b.mea).abs() < 1e-9);
            prop_assert!((a.std - b.std).abs() < 1e-9);
            prop_assert_eq!(a.ent, b.ent);
            prop_assert_eq!(a.med, b.med);
            prop_assert_eq!(a.mode, b.mode);
        }
    }
}
