use crate::error::{Error, Result};
use crate::scalar::Real;

/// Single-channel sample map stored row-major, `height` rows of `width` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "plane must be non-empty, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} samples do not fill a {width}x{height} plane",
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    /// Builds a plane from nested rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Plane::new(width, height, rows.concat())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "plane must be non-empty");
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a plane by evaluating `f(row, col)` at every sample.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "plane must be non-empty");
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn samples(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn into_samples(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.width)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Plane::from_fn(self.height, self.width, |r, c| self.get(c, r))
    }

    pub fn min_max(&self) -> (T, T) {
        self.data
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::from_usize_lossy(self.data.len())
    }

    /// Copies the `width x height` window whose top-left sample is at (`row`, `col`).
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || row + height > self.height || col + width > self.width {
            return Err(Error::Dimension(format!(
                "crop {width}x{height} at ({row}, {col}) exceeds {}x{} plane",
                self.width, self.height
            )));
        }
        Ok(Plane::from_fn(width, height, |r, c| self.get(row + r, col + c)))
    }

    pub fn ensure_min_size(&self, min_width: usize, min_height: usize) -> Result<()> {
        if self.width < min_width || self.height < min_height {
            return Err(Error::Dimension(format!(
                "{}x{} plane is below the {min_width}x{min_height} minimum",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Mirror index into `0..n` without repeating the edge sample (`-1 -> 1`).
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    debug_assert!(n > 1 || i == 0);
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_length() {
        assert!(matches!(
            Plane::<f64>::new(3, 3, vec![0.0; 8]),
            Err(Error::Dimension(_))
        ));
        assert!(Plane::<f64>::new(0, 3, vec![]).is_err());
    }

    #[test]
    fn reflect_mirrors_without_edge_repeat() {
        assert_eq!(reflect_index(-1, 5), 1);
        assert_eq!(reflect_index(-2, 5), 2);
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(6, 5), 2);
        assert_eq!(reflect_index(2, 5), 2);
    }

    #[test]
    fn crop_and_transpose() {
        let p = Plane::from_fn(4, 3, |r, c| (r * 10 + c) as f64);
        let c = p.crop(1, 2, 2, 2).unwrap();
        assert_eq!(c.samples(), &[12.0, 13.0, 22.0, 23.0]);
        let t = p.transpose();
        assert_eq!((t.width(), t.height()), (3, 4));
        assert_eq!(t.get(3, 2), p.get(2, 3));
        assert!(p.crop(2, 0, 4, 2).is_err());
    }
}
