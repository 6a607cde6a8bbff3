//! Correlation criteria, the five-parameter logistic mapping, and the
//! content-wise train/test protocol for learned scores.
//!
//! | criterion | definition |
//! |-----------|------------|
//! | SRCC | `1 - 6 Σ d_t² / (T (T² - 1))` over fractional ranks |
//! | KRCC | `2 (F_c - F_d) / (T (T - 1))` (τ-a; tied pairs count as neither) |
//! | PLCC | Pearson correlation of `s` and the mapped scores |
//! | RMSE | `sqrt(Σ (s_t - o_t)² / T)` against the mapped scores |
//!
//! Mapping: `ε(q) = b1 (1/2 - 1 / (1 + exp(b2 (q - b3)))) + b4 q + b5`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ChannelConfig;
use crate::imageio::{decode_image, DatasetManifest};
use crate::nrbp::{nrbp_features, svr_predict, svr_train, SvrConfig};
use crate::scalar::Real;

pub const MIN_LOGISTIC_SAMPLES: usize = 5;
const LM_MAX_ITER: usize = 2000;
const LM_GRAD_TOL: f64 = 1e-10;

fn check_pair<T>(s: &[T], o: &[T], min: usize) -> Result<()> {
    if s.len() != o.len() {
        return Err(Error::Dimension(format!("{} scores vs {} scores", s.len(), o.len())));
    }
    if s.len() < min {
        return Err(Error::TooFewSamples {
            needed: min,
            got: s.len(),
        });
    }
    Ok(())
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn fractional_ranks<T: Real>(v: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite scores"));
    let mut ranks = vec![T::zero(); v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = T::from_usize_lossy(i + j + 2) / T::lit(2.0);
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn srcc<T: Real>(s: &[T], o: &[T]) -> Result<T> {
    check_pair(s, o, 3)?;
    let (rs, ro) = (fractional_ranks(s), fractional_ranks(o));
    let d2: T = rs.iter().zip(&ro).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let t = T::from_usize_lossy(s.len());
    let v = T::one() - T::lit(6.0) * d2 / (t * (t * t - T::one()));
    Ok(v.max(-T::one()).min(T::one()))
}

pub fn krcc<T: Real>(s: &[T], o: &[T]) -> Result<T> {
    check_pair(s, o, 2)?;
    let n = s.len();
    let (mut concordant, mut discordant) = (0usize, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = (s[i] - s[j]) * (o[i] - o[j]);
            if p > T::zero() {
                concordant += 1;
            } else if p < T::zero() {
                discordant += 1;
            }
        }
    }
    let num = T::lit(2.0) * (T::from_usize_lossy(concordant) - T::from_usize_lossy(discordant));
    Ok(num / T::from_usize_lossy(n * (n - 1)))
}

/// Pearson correlation; zero when either side has no variance.
pub fn pearson<T: Real>(s: &[T], o: &[T]) -> Result<T> {
    check_pair(s, o, 2)?;
    let t = T::from_usize_lossy(s.len());
    let ms = s.iter().copied().sum::<T>() / t;
    let mo = o.iter().copied().sum::<T>() / t;
    let (mut sso, mut sss, mut soo) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in s.iter().zip(o) {
        sso += (a - ms) * (b - mo);
        sss += (a - ms) * (a - ms);
        soo += (b - mo) * (b - mo);
    }
    if sss <= T::zero() || soo <= T::zero() {
        return Ok(T::zero());
    }
    Ok((sso / (sss * soo).sqrt()).max(-T::one()).min(T::one()))
}

pub fn rmse<T: Real>(s: &[T], o: &[T]) -> Result<T> {
    check_pair(s, o, 1)?;
    let sq: T = s.iter().zip(o).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((sq / T::from_usize_lossy(s.len())).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct LogisticParams<T> {
    pub b1: T,
    pub b2: T,
    pub b3: T,
    pub b4: T,
    pub b5: T,
}

impl<T: Real> LogisticParams<T> {
    fn from_array(b: [T; 5]) -> Self {
        Self {
            b1: b[0],
            b2: b[1],
            b3: b[2],
            b4: b[3],
            b5: b[4],
        }
    }

    pub fn to_array(self) -> [T; 5] {
        [self.b1, self.b2, self.b3, self.b4, self.b5]
    }

    pub fn is_linear(&self) -> bool {
        self.b1 == T::zero()
    }
}

pub fn logistic_apply<T: Real>(p: &LogisticParams<T>, q: T) -> T {
    p.b1 * sigmoid_term(p.b2 * (q - p.b3)) + p.b4 * q + p.b5
}

/// `1/2 - 1/(1 + e^z)`.
fn sigmoid_term<T: Real>(z: T) -> T {
    T::lit(0.5) - T::one() / (T::one() + z.exp())
}

fn mean_std<T: Real>(v: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(v.len());
    let m = v.iter().copied().sum::<T>() / n;
    let var = v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n;
    (m, var.sqrt())
}

/// Ordinary least squares `s ≈ slope q + intercept`.
fn ols<T: Real>(q: &[T], s: &[T]) -> (T, T) {
    let (mq, _) = mean_std(q);
    let (ms, _) = mean_std(s);
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in q.iter().zip(s) {
        sxy += (x - mq) * (y - ms);
        sxx += (x - mq) * (x - mq);
    }
    let slope = sxy / sxx;
    (slope, ms - slope * mq)
}

fn sse<T: Real>(b: &[T; 5], q: &[T], s: &[T]) -> T {
    let p = LogisticParams::from_array(*b);
    q.iter()
        .zip(s)
        .map(|(&x, &y)| {
            let r = logistic_apply(&p, x) - y;
            r * r
        })
        .sum()
}

/// Solves the 5x5 system `a x = rhs` by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve5<T: Real>(mut a: [[T; 5]; 5], mut rhs: [T; 5]) -> Option<[T; 5]> {
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > T::zero()) {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for r in (col + 1)..5 {
            let f = a[r][col] / a[col][col];
            for c in col..5 {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }
    let mut x = [T::zero(); 5];
    for r in (0..5).rev() {
        let mut acc = rhs[r];
        for c in (r + 1)..5 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Levenberg–Marquardt least squares from `b`, returning the refined point.
fn levenberg_marquardt<T: Real>(mut b: [T; 5], q: &[T], s: &[T]) -> [T; 5] {
    let mut cost = sse(&b, q, s);
    let mut lambda = T::lit(1e-3);
    let grad_tol = T::lit(LM_GRAD_TOL);
    for _ in 0..LM_MAX_ITER {
        let mut jtj = [[T::zero(); 5]; 5];
        let mut jtr = [T::zero(); 5];
        let p = LogisticParams::from_array(b);
        for (&x, &y) in q.iter().zip(s) {
            let z = p.b2 * (x - p.b3);
            let g = T::one() / (T::one() + z.exp());
            let dz = p.b1 * g * (T::one() - g);
            let jac = [sigmoid_term(z), dz * (x - p.b3), -dz * p.b2, x, T::one()];
            let r = logistic_apply(&p, x) - y;
            for i in 0..5 {
                jtr[i] += jac[i] * r;
                for k in 0..5 {
                    jtj[i][k] += jac[i] * jac[k];
                }
            }
        }
        if jtr.iter().all(|g| g.abs() <= grad_tol) {
            break;
        }
        let mut improved = false;
        while lambda < T::lit(1e16) {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * (jtj[i][i] + T::lit(1e-12));
            }
            let step = solve5(a, jtr.map(|g| -g));
            if let Some(step) = step {
                let mut trial = b;
                for i in 0..5 {
                    trial[i] += step[i];
                }
                let c = sse(&trial, q, s);
                if c.is_finite() && c < cost {
                    let rel = (cost - c) / cost.max(T::min_positive_value());
                    b = trial;
                    cost = c;
                    lambda = (lambda / T::lit(10.0)).max(T::lit(1e-15));
                    improved = true;
                    if rel < T::lit(1e-15) {
                        return b;
                    }
                    break;
                }
            }
            lambda *= T::lit(10.0);
        }
        if !improved {
            break;
        }
    }
    b
}

/// Least-squares fit of the logistic mapping of `q` onto `s`.
///
/// The fit runs on standardized `q` and is mapped back, which leaves the
/// prescribed initialization (`b1 = range(s)`, `b2 = 4/std(q)`,
/// `b3 = mean(q)`, `b4, b5` from OLS) unchanged while conditioning the
/// normal equations. Falls back to the OLS line (`b1 = 0`) when the
/// logistic does not reduce the squared error below it.
pub fn logistic_fit<T: Real>(q: &[T], s: &[T]) -> Result<LogisticParams<T>> {
    check_pair(q, s, MIN_LOGISTIC_SAMPLES)?;
    if q.iter().chain(s).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite score".into()));
    }
    let (mq, sdq) = mean_std(q);
    if !(sdq > T::zero()) {
        return Err(Error::Fit("objective scores have zero variance".into()));
    }
    let z: Vec<T> = q.iter().map(|&x| (x - mq) / sdq).collect();
    let (smin, smax) = s
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
    let (slope, intercept) = ols(&z, s);
    let linear = [T::zero(), T::one(), T::zero(), slope, intercept];
    let init = [smax - smin, T::lit(4.0), T::zero(), slope, intercept];
    let fitted = levenberg_marquardt(init, &z, s);
    let best = if sse(&fitted, &z, s) < sse(&linear, &z, s) {
        fitted
    } else {
        linear
    };
    // back to raw q: z = (q - mq) / sdq
    let [b1, b2, b3, b4, b5] = best;
    let params = if b1 == T::zero() {
        let (slope, intercept) = ols(q, s);
        [T::zero(), T::one() / sdq, mq, slope, intercept]
    } else {
        [b1, b2 / sdq, mq + sdq * b3, b4 / sdq, b5 - b4 * mq / sdq]
    };
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("logistic parameters diverged".into()));
    }
    Ok(LogisticParams::from_array(params))
}

/// PLCC and RMSE of `s` against the logistic-mapped `q`.
pub fn plcc_rmse<T: Real>(q: &[T], s: &[T]) -> Result<(T, T, LogisticParams<T>)> {
    let params = logistic_fit(q, s)?;
    let mapped: Vec<T> = q.iter().map(|&x| logistic_apply(&params, x)).collect();
    Ok((pearson(s, &mapped)?, rmse(s, &mapped)?, params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMeta {
    pub splits: usize,
    pub seed: u64,
    pub aggregation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct EvalReport<T> {
    pub srcc: T,
    pub krcc: T,
    pub plcc: T,
    pub rmse: T,
    pub n: usize,
    pub logistic: LogisticParams<T>,
    pub protocol_meta: ProtocolMeta,
}

/// All four criteria for objective scores `q` against subjective scores `s`.
pub fn evaluate<T: Real>(q: &[T], s: &[T]) -> Result<EvalReport<T>> {
    let (plcc, rmse, logistic) = plcc_rmse(q, s)?;
    Ok(EvalReport {
        srcc: srcc(s, q)?,
        krcc: krcc(s, q)?,
        plcc,
        rmse,
        n: q.len(),
        logistic,
        protocol_meta: ProtocolMeta {
            splits: 1,
            seed: 0,
            aggregation: "single".into(),
        },
    })
}

/// Criteria for one split. Constant predictions carry no ranking or linear
/// information, so they score zero correlation and the spread of `s` as RMSE.
fn split_report<T: Real>(q: &[T], s: &[T]) -> Result<EvalReport<T>> {
    let (mq, sdq) = mean_std(q);
    if !(sdq > T::zero()) {
        let (ms, sds) = mean_std(s);
        return Ok(EvalReport {
            srcc: T::zero(),
            krcc: T::zero(),
            plcc: T::zero(),
            rmse: sds,
            n: q.len(),
            logistic: LogisticParams::from_array([T::zero(), T::one(), mq, T::zero(), ms]),
            protocol_meta: ProtocolMeta {
                splits: 1,
                seed: 0,
                aggregation: "single".into(),
            },
        });
    }
    evaluate(q, s)
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite criteria"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Content ids held out in repetition `rep`: a seeded shuffle of the ids with
/// the first 20 % (at least one, never all) taken for testing.
pub fn test_contents(content_ids: &[&str], seed: u64, rep: usize) -> Vec<String> {
    let mut ids: Vec<&str> = content_ids.to_vec();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64)));
    let n = ids.len();
    let n_test = ((n as f64 * 0.2).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    ids[..n_test].iter().map(|s| s.to_string()).collect()
}

/// Repeated content-wise 80/20 train/test evaluation of the NRBP regressor;
/// each criterion is the median over repetitions, and the logistic
/// parameters come from the repetition with the median SRCC.
pub fn run_protocol<T: Real>(
    db: &DatasetManifest,
    model_cfg: &SvrConfig<T>,
    channel: &ChannelConfig<T>,
    splits: usize,
    seed: u64,
) -> Result<EvalReport<T>> {
    let ids = db.content_ids();
    if ids.len() < 2 {
        return Err(Error::Protocol(format!(
            "need at least 2 content groups, found {}",
            ids.len()
        )));
    }
    if splits == 0 {
        return Err(Error::Protocol("splits must be positive".into()));
    }
    model_cfg.validate()?;
    channel.validate()?;

    let features: Vec<Vec<T>> = db
        .entries
        .par_iter()
        .map(|e| {
            let img = decode_image::<T>(&e.image_path)?;
            Ok(nrbp_features(&img, channel)?.into_values())
        })
        .collect::<Result<_>>()?;
    let mos: Vec<T> = db.entries.iter().map(|e| T::lit(e.mos)).collect();

    let reports: Vec<EvalReport<T>> = (0..splits)
        .into_par_iter()
        .map(|rep| {
            let held = test_contents(&ids, seed, rep);
            let is_test = |i: usize| held.iter().any(|c| *c == db.entries[i].content_id);
            let (train, test): (Vec<usize>, Vec<usize>) = (0..db.len()).partition(|&i| !is_test(i));
            if test.len() < MIN_LOGISTIC_SAMPLES {
                return Err(Error::Protocol(format!(
                    "repetition {rep} has {} test images; need at least {MIN_LOGISTIC_SAMPLES}",
                    test.len()
                )));
            }
            let x: Vec<Vec<T>> = train.iter().map(|&i| features[i].clone()).collect();
            let y: Vec<T> = train.iter().map(|&i| mos[i]).collect();
            let cfg = SvrConfig {
                seed: model_cfg.seed.wrapping_add(rep as u64),
                ..model_cfg.clone()
            };
            let model = svr_train(&x, &y, &cfg)?;
            let q = test
                .iter()
                .map(|&i| svr_predict(&model, &features[i]))
                .collect::<Result<Vec<T>>>()?;
            let s: Vec<T> = test.iter().map(|&i| mos[i]).collect();
            split_report(&q, &s)
        })
        .collect::<Result<_>>()?;

    let pick = |f: fn(&EvalReport<T>) -> T| median(reports.iter().map(f).collect());
    let srcc_med = pick(|r| r.srcc);
    let (mut idx, mut best) = (0, T::infinity());
    for (k, r) in reports.iter().enumerate() {
        let d = (r.srcc - srcc_med).abs();
        if d < best {
            best = d;
            idx = k;
        }
    }
    Ok(EvalReport {
        srcc: srcc_med,
        krcc: pick(|r| r.krcc),
        plcc: pick(|r| r.plcc),
        rmse: pick(|r| r.rmse),
        n: db.len(),
        logistic: reports[idx].logistic,
        protocol_meta: ProtocolMeta {
            splits,
            seed,
            aggregation: "median".into(),
        },
    })
}
