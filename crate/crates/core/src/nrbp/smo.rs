//! Dual solver for ε-SVR.
//!
//! The `n`-point problem is written over `2n` box-constrained variables
//! (`α` with label +1, `α*` with label -1):
//!
//! ```text
//! min ½ aᵀQa + pᵀa   s.t.  yᵀa = 0,  0 ≤ a ≤ C
//! Q_st = y_s y_t K(s mod n, t mod n),  p = (ε - target, ε + target)
//! ```
//!
//! Each step picks the maximal-violating pair with second-order working set
//! selection and solves the two-variable subproblem analytically.

use crate::error::{Error, Result};
use crate::scalar::Real;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution<T> {
    /// `α_i - α*_i` per training point.
    pub coefs: Vec<T>,
    /// Decision offset; predictions are `Σ coefs_i K(x_i, x) + bias`.
    pub bias: T,
    /// Final maximal KKT violation `m(a) - M(a)`.
    pub violation: T,
    pub iterations: usize,
}

/// Solves ε-SVR on a precomputed kernel matrix (row-major `n x n`).
pub fn solve_epsilon_svr<T: Real>(
    kernel: &[T],
    targets: &[T],
    c: T,
    epsilon: T,
    tol: T,
    max_iter: usize,
) -> Result<SmoSolution<T>> {
    let n = targets.len();
    assert_eq!(kernel.len(), n * n, "kernel matrix must be n x n");
    let l2 = 2 * n;
    let sign = |t: usize| if t < n { T::one() } else { -T::one() };
    let k_at = |s: usize, t: usize| kernel[(s % n) * n + (t % n)];
    let diag: Vec<T> = (0..l2).map(|t| k_at(t, t)).collect();

    let mut alpha = vec![T::zero(); l2];
    let mut grad: Vec<T> = (0..l2)
        .map(|t| if t < n { epsilon - targets[t] } else { epsilon + targets[t - n] })
        .collect();

    let at_upper = |a: T| a >= c;
    let at_lower = |a: T| a <= T::zero();
    let tau = T::lit(TAU);
    let mut q_i = vec![T::zero(); l2];
    let mut q_j = vec![T::zero(); l2];
    let mut iterations = 0;

    let violation = loop {
        // first index: maximal violator in I_up
        let mut g_max = T::neg_infinity();
        let mut i = usize::MAX;
        for t in 0..l2 {
            if t < n {
                if !at_upper(alpha[t]) && -grad[t] >= g_max {
                    g_max = -grad[t];
                    i = t;
                }
            } else if !at_lower(alpha[t]) && grad[t] >= g_max {
                g_max = grad[t];
                i = t;
            }
        }

        let mut g_max2 = T::neg_infinity();
        let mut j = usize::MAX;
        let mut best_obj = T::infinity();
        if i != usize::MAX {
            let yi = sign(i);
            for t in 0..l2 {
                q_i[t] = yi * sign(t) * k_at(i, t);
            }
            for t in 0..l2 {
                if t < n {
                    if !at_lower(alpha[t]) {
                        let diff = g_max + grad[t];
                        if grad[t] >= g_max2 {
                            g_max2 = grad[t];
                        }
                        if diff > T::zero() {
                            let mut quad = diag[i] + diag[t] - T::lit(2.0) * yi * q_i[t];
                            if quad <= T::zero() {
                                quad = tau;
                            }
                            let obj = -(diff * diff) / quad;
                            if obj <= best_obj {
                                j = t;
                                best_obj = obj;
                            }
                        }
                    }
                } else if !at_upper(alpha[t]) {
                    let diff = g_max - grad[t];
                    if -grad[t] >= g_max2 {
                        g_max2 = -grad[t];
                    }
                    if diff > T::zero() {
                        let mut quad = diag[i] + diag[t] + T::lit(2.0) * yi * q_i[t];
                        if quad <= T::zero() {
                            quad = tau;
                        }
                        let obj = -(diff * diff) / quad;
                        if obj <= best_obj {
                            j = t;
                            best_obj = obj;
                        }
                    }
                }
            }
        }

        let gap = if i == usize::MAX { T::zero() } else { g_max + g_max2 };
        if gap < tol || j == usize::MAX {
            break gap.max(T::zero());
        }
        if iterations >= max_iter {
            return Err(Error::Convergence {
                violation: gap.as_f64(),
                iterations,
            });
        }
        iterations += 1;

        let (yi, yj) = (sign(i), sign(j));
        for t in 0..l2 {
            q_j[t] = yj * sign(t) * k_at(j, t);
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ai, aj) = two_variable_step(
            (alpha[i], alpha[j]),
            (grad[i], grad[j]),
            (diag[i], diag[j]),
            q_i[j],
            yi != yj,
            c,
            tau,
        );
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..l2 {
            grad[t] += q_i[t] * di + q_j[t] * dj;
        }
    };

    let bias = -offset(&alpha, &grad, n, c);
    let coefs = (0..n).map(|k| alpha[k] - alpha[k + n]).collect();
    Ok(SmoSolution {
        coefs,
        bias,
        violation,
        iterations,
    })
}

/// Analytic minimizer of the two-variable subproblem, clipped to the box.
fn two_variable_step<T: Real>(
    (mut ai, mut aj): (T, T),
    (gi, gj): (T, T),
    (qii, qjj): (T, T),
    qij: T,
    opposite: bool,
    c: T,
    tau: T,
) -> (T, T) {
    let zero = T::zero();
    if opposite {
        let mut quad = qii + qjj + T::lit(2.0) * qij;
        if quad <= zero {
            quad = tau;
        }
        let delta = (-gi - gj) / quad;
        let diff = ai - aj;
        ai += delta;
        aj += delta;
        if diff > zero {
            if aj < zero {
                aj = zero;
                ai = diff;
            }
        } else if ai < zero {
            ai = zero;
            aj = -diff;
        }
        if diff > zero {
            if ai > c {
                ai = c;
                aj = c - diff;
            }
        } else if aj > c {
            aj = c;
            ai = c + diff;
        }
    } else {
        let mut quad = qii + qjj - T::lit(2.0) * qij;
        if quad <= zero {
            quad = tau;
        }
        let delta = (gi - gj) / quad;
        let sum = ai + aj;
        ai -= delta;
        aj += delta;
        if sum > c {
            if ai > c {
                ai = c;
                aj = sum - c;
            }
        } else if aj < zero {
            aj = zero;
            ai = sum;
        }
        if sum > c {
            if aj > c {
                aj = c;
                ai = sum - c;
            }
        } else if ai < zero {
            ai = zero;
            aj = sum;
        }
    }
    (ai, aj)
}

/// Threshold `ρ` of the decision function `Σ coef K - ρ`: the mean of
/// `y_t G_t` over free variables, or the midpoint of the feasible interval
/// when every variable sits on a bound.
fn offset<T: Real>(alpha: &[T], grad: &[T], n: usize, c: T) -> T {
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut sum_free, mut n_free) = (T::zero(), 0usize);
    for (t, (&a, &g)) in alpha.iter().zip(grad).enumerate() {
        let positive = t < n;
        let yg = if positive { g } else { -g };
        if a >= c {
            if positive {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if a <= T::zero() {
            if positive {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / T::from_usize_lossy(n_free)
    } else {
        (ub + lb) / T::lit(2.0)
    }
}
