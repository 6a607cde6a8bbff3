use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-dimension affine map of the training range onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct MinMaxScaler<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

pub fn fit_scaler<T: Real>(rows: &[Vec<T>]) -> Result<MinMaxScaler<T>> {
    let first = rows.first().ok_or_else(|| Error::Data("cannot fit a scaler to no rows".into()))?;
    let dim = first.len();
    let mut min = first.clone();
    let mut max = first.clone();
    for row in &rows[1..] {
        if row.len() != dim {
            return Err(Error::Schema(format!("row of length {} among length {dim}", row.len())));
        }
        for (k, &v) in row.iter().enumerate() {
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
        }
    }
    Ok(MinMaxScaler { min, max })
}

impl<T: Real> MinMaxScaler<T> {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Dimensions whose training values never varied; they map to 0.
    pub fn is_constant(&self, k: usize) -> bool {
        !(self.max[k] > self.min[k])
    }

    pub fn transform(&self, x: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                if self.is_constant(k) {
                    T::zero()
                } else {
                    two * (v - self.min[k]) / (self.max[k] - self.min[k]) - T::one()
                }
            })
            .collect()
    }
}
