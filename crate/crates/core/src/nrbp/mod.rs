//! No-reference scoring: global ⊕ local feature vectors regressed onto
//! opinion scores with an RBF ε-SVR.

mod model;
mod scaler;
mod smo;
mod svr;

pub use model::{load_model, save_model, svr_predict, SvrModel, TrainMeta, MODEL_VERSION};
pub use scaler::{fit_scaler, MinMaxScaler};
pub use smo::{solve_epsilon_svr, SmoSolution};
pub use svr::{cross_validated_rmse, fold_assignment, svr_train, GammaSpec, GridSpec, SvrConfig};

use crate::error::Result;
use crate::features::{global_features, local_features, ChannelConfig, FeatureVector, Schema};
use crate::imageio::YCbCrImage;
use crate::scalar::Real;

/// Global block followed by the patch-averaged local block.
pub fn nrbp_features<T: Real>(img: &YCbCrImage<T>, cfg: &ChannelConfig<T>) -> Result<FeatureVector<T>> {
    let mut values = global_features(img, cfg)?.into_values();
    values.extend(local_features(img, cfg)?.into_values());
    FeatureVector::new(Schema::Nrbp284, values)
}

/// Schema label recorded in model files for `dim`-dimensional inputs.
pub fn schema_label(dim: usize) -> String {
    [Schema::Ldca22, Schema::On120, Schema::Global142, Schema::Nrbp284]
        .into_iter()
        .find(|s| s.len() == dim)
        .map_or_else(|| format!("RAW-{dim}"), |s| s.as_str().to_string())
}

/// Input dimension implied by a schema label.
pub fn schema_dim(label: &str) -> Option<usize> {
    if let Ok(s) = label.parse::<Schema>() {
        return Some(s.len());
    }
    label.strip_prefix("RAW-")?.parse().ok().filter(|&d| d > 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schema_labels() {
        assert_eq!(schema_label(284), "NRBP-284");
        assert_eq!(schema_label(2), "RAW-2");
        assert_eq!(schema_dim("NRBP-284"), Some(284));
        assert_eq!(schema_dim("RAW-7"), Some(7));
        assert_eq!(schema_dim("RAW-0"), None);
        assert_eq!(schema_dim("bogus"), None);
    }

    #[test]
    fn single_patch_halves_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rgb: Vec<u8> = (0..32 * 32 * 3).map(|_| rng.gen()).collect();
        let img = YCbCrImage::<f64>::from_rgb8(32, 32, &rgb).unwrap();
        let fv = nrbp_features(&img, &ChannelConfig::default()).unwrap();
        assert_eq!(fv.values().len(), 284);
        assert_eq!(&fv.values()[..142], &fv.values()[142..]);
        assert_eq!(fv, nrbp_features(&img, &ChannelConfig::default()).unwrap());
    }
}
