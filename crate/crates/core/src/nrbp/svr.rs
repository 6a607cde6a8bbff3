//! RBF ε-SVR training with optional cross-validated grid search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{SvrModel, TrainMeta, MODEL_VERSION};
use super::scaler::{fit_scaler, MinMaxScaler};
use super::schema_label;
use super::smo::solve_epsilon_svr;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_TRAIN_ROWS: usize = 10;

/// RBF width; `Auto` resolves to `1 / dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaSpec<T> {
    Auto,
    Value(T),
}

/// Base-2 exponents searched for `c` and `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_exponents: Vec<i32>,
    pub gamma_exponents: Vec<i32>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            c_exponents: (-1..=10).collect(),
            gamma_exponents: (-10..=2).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SvrConfig<T> {
    /// Box constraint; ignored when `grid` is set.
    pub c: T,
    pub epsilon: T,
    /// Ignored when `grid` is set.
    pub gamma: GammaSpec<T>,
    pub grid: Option<GridSpec>,
    pub folds: usize,
    pub tol: T,
    pub max_passes: usize,
    pub seed: u64,
}

impl<T: Real> Default for SvrConfig<T> {
    fn default() -> Self {
        Self {
            c: T::one(),
            epsilon: T::lit(0.1),
            gamma: GammaSpec::Auto,
            grid: Some(GridSpec::default()),
            folds: 5,
            tol: T::lit(1e-3),
            max_passes: 10_000_000,
            seed: 0,
        }
    }
}

impl<T: Real> SvrConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !positive(self.c) || !positive(self.epsilon) || !positive(self.tol) {
            return Err(Error::Config("c, epsilon and tol must be positive".into()));
        }
        if let GammaSpec::Value(g) = self.gamma {
            if !positive(g) {
                return Err(Error::Config(format!("gamma {g} must be positive")));
            }
        }
        if let Some(grid) = &self.grid {
            if grid.c_exponents.is_empty() || grid.gamma_exponents.is_empty() {
                return Err(Error::Config("grid needs at least one exponent per axis".into()));
            }
            if self.folds < 2 {
                return Err(Error::Config(format!("{} folds; need at least 2", self.folds)));
            }
        }
        if self.max_passes == 0 {
            return Err(Error::Config("max_passes must be positive".into()));
        }
        Ok(())
    }

    fn resolved_gamma(&self, dim: usize) -> T {
        match self.gamma {
            GammaSpec::Auto => T::one() / T::from_usize_lossy(dim.max(1)),
            GammaSpec::Value(g) => g,
        }
    }
}

/// Fold index per sample: a seeded shuffle dealt round-robin, so fold sizes
/// differ by at most one and depend only on `(n, folds, seed)`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        fold[i] = k % folds.max(1);
    }
    fold
}

fn rbf<T: Real>(a: &[T], b: &[T], gamma: T) -> T {
    let d2: T = a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum();
    (-gamma * d2).exp()
}

fn kernel_matrix<T: Real>(x: &[Vec<T>], gamma: T) -> Vec<T> {
    let n = x.len();
    let mut k = vec![T::zero(); n * n];
    k.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rbf(&x[i], &x[j], gamma);
        }
    });
    k
}

struct Fitted<T> {
    support_vectors: Vec<Vec<T>>,
    dual_coefs: Vec<T>,
    bias: T,
    violation: T,
    iterations: usize,
}

fn fit_scaled<T: Real>(x: &[Vec<T>], y: &[T], c: T, gamma: T, cfg: &SvrConfig<T>) -> Result<Fitted<T>> {
    let sol = solve_epsilon_svr(&kernel_matrix(x, gamma), y, c, cfg.epsilon, cfg.tol, cfg.max_passes)?;
    let (mut support_vectors, mut dual_coefs) = (Vec::new(), Vec::new());
    for (row, &b) in x.iter().zip(&sol.coefs) {
        if b != T::zero() {
            support_vectors.push(row.clone());
            dual_coefs.push(b);
        }
    }
    Ok(Fitted {
        support_vectors,
        dual_coefs,
        bias: sol.bias,
        violation: sol.violation,
        iterations: sol.iterations,
    })
}

fn predict_scaled<T: Real>(f: &Fitted<T>, x: &[T], gamma: T) -> T {
    f.support_vectors
        .iter()
        .zip(&f.dual_coefs)
        .map(|(sv, &b)| b * rbf(sv, x, gamma))
        .sum::<T>()
        + f.bias
}

fn check_inputs<T: Real>(x: &[Vec<T>], y: &[T]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} feature rows but {} targets", x.len(), y.len())));
    }
    if x.len() < MIN_TRAIN_ROWS {
        return Err(Error::TooFewSamples {
            needed: MIN_TRAIN_ROWS,
            got: x.len(),
        });
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::Schema("empty feature rows".into()));
    }
    if let Some(r) = x.iter().position(|r| r.len() != dim) {
        return Err(Error::Schema(format!("row {r} has {} values, expected {dim}", x[r].len())));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite training value".into()));
    }
    Ok(dim)
}

/// `k`-fold cross-validated RMSE for fixed `(c, γ)` on raw rows; the scaler is
/// refitted on each training fold.
pub fn cross_validated_rmse<T: Real>(x: &[Vec<T>], y: &[T], c: T, gamma: T, cfg: &SvrConfig<T>) -> Result<T> {
    check_inputs(x, y)?;
    let folds = fold_assignment(x.len(), cfg.folds, cfg.seed);
    let mut sq = T::zero();
    for f in 0..cfg.folds {
        let train: Vec<usize> = (0..x.len()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..x.len()).filter(|&i| folds[i] == f).collect();
        if test.is_empty() || train.is_empty() {
            continue;
        }
        let raw: Vec<Vec<T>> = train.iter().map(|&i| x[i].clone()).collect();
        let scaler = fit_scaler(&raw)?;
        let xs: Vec<Vec<T>> = raw.iter().map(|r| scaler.transform(r)).collect();
        let ys: Vec<T> = train.iter().map(|&i| y[i]).collect();
        let fitted = fit_scaled(&xs, &ys, c, gamma, cfg)?;
        for &i in &test {
            let e = predict_scaled(&fitted, &scaler.transform(&x[i]), gamma) - y[i];
            sq += e * e;
        }
    }
    Ok((sq / T::from_usize_lossy(x.len())).sqrt())
}

/// Grid cell with the lowest CV error; ties keep the first cell in
/// `(c, γ)` row-major order.
fn grid_search<T: Real>(x: &[Vec<T>], y: &[T], grid: &GridSpec, cfg: &SvrConfig<T>) -> Result<(T, T)> {
    let two = T::lit(2.0);
    let cells: Vec<(T, T)> = grid
        .c_exponents
        .iter()
        .flat_map(|&ce| grid.gamma_exponents.iter().map(move |&ge| (two.powi(ce), two.powi(ge))))
        .collect();
    let scores: Vec<Option<T>> = cells
        .par_iter()
        .map(|&(c, g)| match cross_validated_rmse(x, y, c, g, cfg) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("grid cell c={c} gamma={g} skipped: {e}");
                None
            }
        })
        .collect();
    let mut best: Option<(T, usize)> = None;
    for (k, s) in scores.iter().enumerate() {
        if let Some(r) = *s {
            if best.map_or(true, |(b, _)| r < b) {
                best = Some((r, k));
            }
        }
    }
    best.map(|(_, k)| cells[k])
        .ok_or_else(|| Error::Fit("no grid cell could be trained".into()))
}

/// Trains an RBF ε-SVR on raw feature rows.
pub fn svr_train<T: Real>(x: &[Vec<T>], y: &[T], cfg: &SvrConfig<T>) -> Result<SvrModel<T>> {
    cfg.validate()?;
    let dim = check_inputs(x, y)?;
    let (c, gamma) = match &cfg.grid {
        Some(grid) => grid_search(x, y, grid, cfg)?,
        None => (cfg.c, cfg.resolved_gamma(dim)),
    };
    let scaler: MinMaxScaler<T> = fit_scaler(x)?;
    let xs: Vec<Vec<T>> = x.iter().map(|r| scaler.transform(r)).collect();
    let fitted = fit_scaled(&xs, y, c, gamma, cfg)?;
    Ok(SvrModel {
        version: MODEL_VERSION.to_string(),
        feature_schema: schema_label(dim),
        scale_min: scaler.min,
        scale_max: scaler.max,
        support_vectors: fitted.support_vectors,
        dual_coefs: fitted.dual_coefs,
        bias: fitted.bias,
        kernel_gamma: gamma,
        train_meta: TrainMeta {
            c,
            epsilon: cfg.epsilon,
            seed: cfg.seed,
            n_train: x.len(),
            kkt_violation: fitted.violation,
            iterations: fitted.iterations,
        },
    })
}
