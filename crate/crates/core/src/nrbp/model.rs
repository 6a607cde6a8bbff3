use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema_dim;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MODEL_VERSION: &str = "nrbp-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct TrainMeta<T> {
    pub c: T,
    pub epsilon: T,
    pub seed: u64,
    pub n_train: usize,
    pub kkt_violation: T,
    pub iterations: usize,
}

/// Trained regressor. Support vectors are stored in the scaled `[-1, 1]`
/// space; raw inputs are scaled with `scale_min` / `scale_max` at predict time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SvrModel<T> {
    pub version: String,
    pub feature_schema: String,
    pub scale_min: Vec<T>,
    pub scale_max: Vec<T>,
    pub support_vectors: Vec<Vec<T>>,
    pub dual_coefs: Vec<T>,
    pub bias: T,
    pub kernel_gamma: T,
    pub train_meta: TrainMeta<T>,
}

impl<T: Real> SvrModel<T> {
    pub fn dim(&self) -> usize {
        self.scale_min.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Version {
                expected: MODEL_VERSION.into(),
                found: self.version.clone(),
            });
        }
        let dim = schema_dim(&self.feature_schema)
            .ok_or_else(|| Error::Schema(format!("unknown feature schema {:?}", self.feature_schema)))?;
        if self.scale_min.len() != dim || self.scale_max.len() != dim {
            return Err(Error::Schema(format!(
                "{} expects {dim} scale entries, found {} / {}",
                self.feature_schema,
                self.scale_min.len(),
                self.scale_max.len()
            )));
        }
        if let Some(sv) = self.support_vectors.iter().find(|sv| sv.len() != dim) {
            return Err(Error::Schema(format!("support vector of length {}, expected {dim}", sv.len())));
        }
        if self.dual_coefs.len() != self.support_vectors.len() {
            return Err(Error::Schema(format!(
                "{} dual coefficients for {} support vectors",
                self.dual_coefs.len(),
                self.support_vectors.len()
            )));
        }
        if self.scale_min.iter().zip(&self.scale_max).any(|(a, b)| !(a <= b)) {
            return Err(Error::Data("scale_min exceeds scale_max".into()));
        }
        let finite = self
            .scale_min
            .iter()
            .chain(&self.scale_max)
            .chain(self.support_vectors.iter().flatten())
            .chain(&self.dual_coefs)
            .chain([&self.bias, &self.kernel_gamma])
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Data("non-finite model parameter".into()));
        }
        if !(self.kernel_gamma > T::zero()) {
            return Err(Error::Data(format!("kernel_gamma {} must be positive", self.kernel_gamma)));
        }
        Ok(())
    }

    fn scale(&self, x: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        x.iter()
            .zip(self.scale_min.iter().zip(&self.scale_max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    two * (v - lo) / (hi - lo) - T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

/// `Σ coef_i exp(-γ‖sv_i - scale(x)‖²) + bias`, unclamped.
pub fn svr_predict<T: Real>(model: &SvrModel<T>, x: &[T]) -> Result<T> {
    if x.len() != model.dim() {
        return Err(Error::Schema(format!(
            "model expects {} features, got {}",
            model.dim(),
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    let z = model.scale(x);
    let sum: T = model
        .support_vectors
        .iter()
        .zip(&model.dual_coefs)
        .map(|(sv, &b)| {
            let d2: T = sv.iter().zip(&z).map(|(&p, &q)| (p - q) * (p - q)).sum();
            b * (-model.kernel_gamma * d2).exp()
        })
        .sum();
    Ok(sum + model.bias)
}

pub fn save_model<T: Real>(model: &SvrModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(model).expect("model serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<SvrModel<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |e: serde_json::Error| Error::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    // version is checked before the schema so old files fail clearly
    let value: serde_json::Value = serde_json::from_str(&text).map_err(malformed)?;
    match value.get("version").and_then(|v| v.as_str()) {
        Some(MODEL_VERSION) => {}
        found => {
            return Err(Error::Version {
                expected: MODEL_VERSION.into(),
                found: found.unwrap_or("<missing>").into(),
            })
        }
    }
    let model: SvrModel<T> = serde_json::from_value(value).map_err(malformed)?;
    model.validate()?;
    Ok(model)
}
