//! Rayleigh distribution parametrized by its mean `mu`.
//!
//! `f(y; mu) = pi y / (2 mu^2) * exp(-pi y^2 / (4 mu^2))`, `y > 0`.

use crate::error::{domain, Result};
use crate::scalar::Scalar;

fn check_mean<T: Scalar>(mu: T) -> Result<()> {
    if !(mu.is_finite() && mu > T::zero()) {
        return domain(format!("Rayleigh mean must be finite and > 0, got {mu}"));
    }
    Ok(())
}

pub fn rayleigh_pdf<T: Scalar>(y: T, mu: T) -> Result<T> {
    check_mean(mu)?;
    if !(y.is_finite() && y > T::zero()) {
        return domain(format!("Rayleigh density needs y > 0, got {y}"));
    }
    Ok(pdf_unchecked(y, mu))
}

#[inline]
pub(crate) fn pdf_unchecked<T: Scalar>(y: T, mu: T) -> T {
    let pi = T::PI();
    let mu2 = mu * mu;
    pi * y / (T::lit(2.0) * mu2) * (-pi * y * y / (T::lit(4.0) * mu2)).exp()
}

pub fn rayleigh_cdf<T: Scalar>(y: T, mu: T) -> Result<T> {
    check_mean(mu)?;
    if y.is_nan() || y < T::zero() {
        return domain(format!("Rayleigh CDF needs y >= 0, got {y}"));
    }
    Ok(cdf_unchecked(y, mu))
}

#[inline]
pub(crate) fn cdf_unchecked<T: Scalar>(y: T, mu: T) -> T {
    let z = T::PI() * y * y / (T::lit(4.0) * mu * mu);
    -(-z).exp_m1()
}

/// Upper tail `1 - F(y; mu)`, accurate far into the tail.
#[inline]
pub(crate) fn survival_unchecked<T: Scalar>(y: T, mu: T) -> T {
    (-T::PI() * y * y / (T::lit(4.0) * mu * mu)).exp()
}

pub fn rayleigh_quantile<T: Scalar>(u: T, mu: T) -> Result<T> {
    check_mean(mu)?;
    if !(u >= T::zero() && u < T::one()) {
        return domain(format!("Rayleigh quantile needs u in [0, 1), got {u}"));
    }
    Ok(quantile_unchecked(u, mu))
}

#[inline]
pub(crate) fn quantile_unchecked<T: Scalar>(u: T, mu: T) -> T {
    T::lit(2.0) * mu / T::PI().sqrt() * (-(-u).ln_1p()).sqrt()
}

/// Conditional mean and variance: `(mu, mu^2 (4/pi - 1))`.
pub fn mean_variance<T: Scalar>(mu: T) -> Result<(T, T)> {
    check_mean(mu)?;
    Ok((mu, mu * mu * (T::lit(4.0) / T::PI() - T::one())))
}

/// Median `2 mu sqrt(ln 2 / pi)`.
pub fn rayleigh_median<T: Scalar>(mu: T) -> Result<T> {
    check_mean(mu)?;
    Ok(T::lit(2.0) * mu * (T::LN_2() / T::PI()).sqrt())
}
