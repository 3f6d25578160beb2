//! Link functions connecting the conditional mean to the linear predictor.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Log,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Log => "log",
        }
    }

    /// `g(x)`.
    pub fn apply<T: Scalar>(self, x: T) -> Result<T> {
        check_positive(x)?;
        Ok(self.eval(x))
    }

    /// `g^-1(v)`.
    pub fn inverse<T: Scalar>(self, v: T) -> Result<T> {
        if v.is_nan() {
            return domain("link inverse of NaN");
        }
        Ok(self.eval_inverse(v))
    }

    /// `g'(x)`.
    pub fn deriv<T: Scalar>(self, x: T) -> Result<T> {
        check_positive(x)?;
        Ok(self.eval_deriv(x))
    }

    #[inline]
    pub fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            Link::Log => x.ln(),
        }
    }

    #[inline]
    pub fn eval_inverse<T: Scalar>(self, v: T) -> T {
        match self {
            Link::Log => v.exp(),
        }
    }

    #[inline]
    pub fn eval_deriv<T: Scalar>(self, x: T) -> T {
        match self {
            Link::Log => x.recip(),
        }
    }

    /// `d mu / d eta = 1 / g'(mu)`.
    #[inline]
    pub fn dmu_deta<T: Scalar>(self, mu: T) -> T {
        self.eval_deriv(mu).recip()
    }
}

impl std::str::FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log" => Ok(Link::Log),
            other => Err(format!("unsupported link '{other}' (available: log)")),
        }
    }
}

fn check_positive<T: Scalar>(x: T) -> Result<()> {
    if !(x > T::zero()) {
        return domain(format!("link argument must be > 0, got {x}"));
    }
    Ok(())
}
