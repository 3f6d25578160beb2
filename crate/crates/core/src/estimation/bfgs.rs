//! Quasi-Newton minimizer: BFGS inverse-Hessian updates with a backtracking
//! line search enforcing sufficient decrease.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub trait Objective<T> {
    /// `None` marks a point where the objective cannot be evaluated; the
    /// line search treats it as `+inf`.
    fn value(&mut self, x: &[T]) -> Option<T>;
    fn value_and_gradient(&mut self, x: &[T]) -> Option<(T, Vec<T>)>;
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions<T> {
    pub max_iter: usize,
    /// Stop when `max_i |grad_i| <= grad_tol`.
    pub grad_tol: T,
    /// Stop when `max_i |step_i| / max(1, max_i |x_i|) < step_tol`.
    pub step_tol: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    LineSearchFailed,
    InvalidStart,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::GradientTolerance | StopReason::StepTolerance)
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub iterations: usize,
    pub reason: StopReason,
    /// Objective value after each accepted step, starting with the initial point.
    pub trace: Vec<T>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Minimizes `obj` from `x0`. `h0` seeds the inverse Hessian; identity when absent.
pub fn minimize<T: Scalar, O: Objective<T>>(
    obj: &mut O,
    x0: Vec<T>,
    h0: Option<Matrix<T>>,
    opts: &BfgsOptions<T>,
) -> BfgsOutcome<T> {
    let n = x0.len();
    let h_start = h0.unwrap_or_else(|| Matrix::identity(n));
    let mut x = x0;
    let Some((mut f, mut g)) = obj.value_and_gradient(&x) else {
        return BfgsOutcome {
            gradient: vec![T::nan(); n],
            x,
            value: T::nan(),
            iterations: 0,
            reason: StopReason::InvalidStart,
            trace: Vec::new(),
        };
    };
    let mut h = h_start.clone();
    let mut fresh_h = true;
    let mut trace = vec![f];
    let c1 = T::lit(ARMIJO_C1);
    let half = T::lit(0.5);

    let mut iter = 0;
    let reason = loop {
        if max_abs(&g) <= opts.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iter >= opts.max_iter {
            break StopReason::MaxIterations;
        }
        iter += 1;

        let mut d: Vec<T> = h.mul_vec(&g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) || !slope.is_finite() {
            h = h_start.clone();
            fresh_h = true;
            d = h.mul_vec(&g).into_iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        // backtracking with safeguarded quadratic interpolation
        let mut alpha = T::one();
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + alpha * di).collect();
            match obj.value(&trial) {
                Some(ft) if ft.is_finite() && ft <= f + c1 * alpha * slope => {
                    accepted = Some(trial);
                    break;
                }
                Some(ft) if ft.is_finite() => {
                    let denom = T::lit(2.0) * (ft - f - alpha * slope);
                    let mut next = -slope * alpha * alpha / denom;
                    if !(next.is_finite()) {
                        next = alpha * half;
                    }
                    alpha = next.max(alpha * T::lit(0.1)).min(alpha * half);
                }
                _ => alpha = alpha * T::lit(0.25),
            }
        }

        let Some(x_new) = accepted else {
            if fresh_h {
                break StopReason::LineSearchFailed;
            }
            h = h_start.clone();
            fresh_h = true;
            continue;
        };
        let Some((f_new, g_new)) = obj.value_and_gradient(&x_new) else {
            break StopReason::LineSearchFailed;
        };

        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let yv: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let rel_step = max_abs(&s) / max_abs(&x_new).max(T::one());
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);

        let sy = dot(&s, &yv);
        if sy > T::epsilon() * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            bfgs_update(&mut h, &s, &yv, sy);
            fresh_h = false;
        }
        if rel_step < opts.step_tol {
            break if max_abs(&g) <= opts.grad_tol {
                StopReason::GradientTolerance
            } else {
                StopReason::StepTolerance
            };
        }
    };

    BfgsOutcome {
        x,
        value: f,
        gradient: g,
        iterations: iter,
        reason,
        trace,
    }
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update<T: Scalar>(h: &mut Matrix<T>, s: &[T], y: &[T], sy: T) {
    let n = s.len();
    let rho = sy.recip();
    let hy = h.mul_vec(y);
    let yhy = dot(y, &hy);
    let coef = (T::one() + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            let v = h.get(i, j) - rho * (hy[i] * s[j] + s[i] * hy[j]) + coef * s[i] * s[j];
            h.set(i, j, v);
        }
    }
}
