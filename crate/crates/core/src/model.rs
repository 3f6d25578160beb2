//! Model orders and the flat parameter layout `(beta, phi, theta)`.
//!
//! AR and MA coefficients are indexed by lags `(i, j)` in `{0..=order}^2`
//! minus `(0, 0)`, flattened row-major: `(0,1), (0,2), .., (0,p), (1,0), .., (p,p)`.

use serde::{Deserialize, Serialize};

use crate::error::{RarmaError, Result};
use crate::link::Link;
use crate::scalar::Scalar;

/// Spatial lag `(rows back, cols back)`.
pub type Lag = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p: usize,
    pub q: usize,
    #[serde(default)]
    pub link: Link,
}

impl ModelSpec {
    pub fn new(p: usize, q: usize) -> Self {
        Self {
            p,
            q,
            link: Link::Log,
        }
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = link;
        self
    }

    /// Width of the conditioning border, `max(p, q)`.
    #[inline]
    pub fn w(&self) -> usize {
        self.p.max(self.q)
    }

    #[inline]
    pub fn n_ar(&self) -> usize {
        lag_count(self.p)
    }

    #[inline]
    pub fn n_ma(&self) -> usize {
        lag_count(self.q)
    }

    /// Number of estimated parameters, `(p+1)^2 + (q+1)^2 - 1`.
    #[inline]
    pub fn n_params(&self) -> usize {
        1 + self.n_ar() + self.n_ma()
    }

    pub fn ar_lags(&self) -> Vec<Lag> {
        lags(self.p)
    }

    pub fn ma_lags(&self) -> Vec<Lag> {
        lags(self.q)
    }

    /// Flat indices of every AR and MA coefficient (everything but `beta`).
    pub fn dependence_indices(&self) -> Vec<usize> {
        (1..self.n_params()).collect()
    }

    /// Human-readable parameter labels in flat order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = vec!["beta".to_string()];
        out.extend(self.ar_lags().into_iter().map(|(i, j)| format!("phi({i},{j})")));
        out.extend(self.ma_lags().into_iter().map(|(k, l)| format!("theta({k},{l})")));
        out
    }

    /// Smallest grid side on which the recursion has at least one interior cell.
    pub fn check_grid(&self, rows: usize, cols: usize) -> Result<()> {
        let w = self.w();
        if rows <= w || cols <= w {
            return Err(RarmaError::InsufficientData { rows, cols, w });
        }
        Ok(())
    }

    /// Interior cell count `(N - w)(M - w)`.
    pub fn interior_count(&self, rows: usize, cols: usize) -> usize {
        let w = self.w();
        rows.saturating_sub(w) * cols.saturating_sub(w)
    }
}

fn lag_count(order: usize) -> usize {
    (order + 1) * (order + 1) - 1
}

fn lags(order: usize) -> Vec<Lag> {
    (0..=order)
        .flat_map(|i| (0..=order).map(move |j| (i, j)))
        .filter(|&l| l != (0, 0))
        .collect()
}

/// Flat position of lag `(i, j)` for a square order, `None` for `(0,0)` or out of range.
pub fn lag_position(order: usize, lag: Lag) -> Option<usize> {
    let (i, j) = lag;
    if i > order || j > order || lag == (0, 0) {
        return None;
    }
    Some(i * (order + 1) + j - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ParamVector<T> {
    pub beta: T,
    pub phi: Vec<T>,
    pub theta: Vec<T>,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(spec: &ModelSpec, beta: T, phi: Vec<T>, theta: Vec<T>) -> Result<Self> {
        let v = Self { beta, phi, theta };
        v.check(spec)?;
        Ok(v)
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        Self {
            beta: T::zero(),
            phi: vec![T::zero(); spec.n_ar()],
            theta: vec![T::zero(); spec.n_ma()],
        }
    }

    pub fn from_flat(spec: &ModelSpec, flat: &[T]) -> Result<Self> {
        if flat.len() != spec.n_params() {
            return Err(RarmaError::ParamLength {
                p: spec.p,
                q: spec.q,
                expected: spec.n_params(),
                got: flat.len(),
            });
        }
        let n_ar = spec.n_ar();
        Ok(Self {
            beta: flat[0],
            phi: flat[1..1 + n_ar].to_vec(),
            theta: flat[1 + n_ar..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(1 + self.phi.len() + self.theta.len());
        out.push(self.beta);
        out.extend_from_slice(&self.phi);
        out.extend_from_slice(&self.theta);
        out
    }

    pub fn len(&self) -> usize {
        1 + self.phi.len() + self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.phi.len() != spec.n_ar() || self.theta.len() != spec.n_ma() {
            return Err(RarmaError::ParamLength {
                p: spec.p,
                q: spec.q,
                expected: spec.n_params(),
                got: self.len(),
            });
        }
        if !self.to_flat().iter().all(|v| v.is_finite()) {
            return Err(RarmaError::Domain("parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamVector<U> {
        let c = |v: &T| U::lit(v.as_f64());
        ParamVector {
            beta: c(&self.beta),
            phi: self.phi.iter().map(c).collect(),
            theta: self.theta.iter().map(c).collect(),
        }
    }
}
