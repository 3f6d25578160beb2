//! Expected information, Wald tests, confidence intervals and information criteria.

use serde::{Deserialize, Serialize};

use crate::error::{RarmaError, Result};
use crate::estimation::{evaluate, expected_information, FitResult};
use crate::grid::ImageGrid;
use crate::linalg::{spd_inverse, Cholesky, Matrix};
use crate::model::{ModelSpec, ParamVector};
use crate::scalar::Scalar;
use crate::specfun::{chi2_quantile, chi2_sf, std_normal_quantile};

/// Condition number above which inverting the information matrix is logged.
pub const CONDITION_WARNING: f64 = 1e10;

/// Conditional Fisher information `I(gamma)`, laid out `(beta, phi, theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct FisherMatrix<T> {
    pub matrix: Matrix<T>,
    pub labels: Vec<String>,
    pub n_ar: usize,
    pub n_ma: usize,
}

impl<T: Scalar> FisherMatrix<T> {
    pub(crate) fn new(spec: &ModelSpec, matrix: Matrix<T>) -> Self {
        Self {
            matrix,
            labels: spec.labels(),
            n_ar: spec.n_ar(),
            n_ma: spec.n_ma(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `I^-1(gamma)`; fails when the matrix is not positive definite.
    pub fn inverse(&self) -> Result<Matrix<T>> {
        let (inv, cond) = spd_inverse(&self.matrix)
            .map_err(|e| RarmaError::Inference(format!("singular information matrix: {e}")))?;
        if cond.as_f64() > CONDITION_WARNING {
            log::warn!("information matrix is ill-conditioned (cond ~ {:.3e})", cond.as_f64());
        }
        Ok(inv)
    }

    /// Asymptotic standard errors `sqrt(diag I^-1)`.
    pub fn standard_errors(&self) -> Result<Vec<T>> {
        Ok(self.inverse()?.diagonal().into_iter().map(|v| v.sqrt()).collect())
    }
}

/// Expected information `sum_cells W (d eta)(d eta)^T` at `gamma`.
pub fn fisher_info<T: Scalar>(
    y: &ImageGrid<T>,
    spec: &ModelSpec,
    gamma: &ParamVector<T>,
) -> Result<FisherMatrix<T>> {
    let ev = evaluate(y, spec, gamma, true)?;
    let grads = ev.gradients.as_ref().expect("derivatives requested");
    Ok(FisherMatrix::new(spec, expected_information(spec, &ev.latents, grads)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldReport {
    pub statistic: f64,
    pub df: usize,
    pub pfa: f64,
    /// `chi2_quantile(1 - pfa, df)`.
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    pub subset: Vec<usize>,
}

/// Wald test of `gamma_I = gamma0` for the parameters at flat positions `subset`.
///
/// The weighting block is extracted from `I^-1` (rows and columns of the
/// interest set) and then inverted.
pub fn wald_test<T: Scalar>(
    fit: &FitResult<T>,
    subset: &[usize],
    gamma0: &[T],
    pfa: f64,
) -> Result<WaldReport> {
    wald_from_parts(&fit.gamma_hat.to_flat(), &fit.fisher, subset, gamma0, pfa)
}

pub fn wald_from_parts<T: Scalar>(
    estimate: &[T],
    fisher: &FisherMatrix<T>,
    subset: &[usize],
    gamma0: &[T],
    pfa: f64,
) -> Result<WaldReport> {
    if subset.is_empty() {
        return Err(RarmaError::Inference("Wald subset is empty".into()));
    }
    if subset.len() != gamma0.len() {
        return Err(RarmaError::Inference(format!(
            "Wald null has {} values for {} parameters",
            gamma0.len(),
            subset.len()
        )));
    }
    let mut seen = subset.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != subset.len() || seen.last().is_some_and(|&i| i >= estimate.len()) {
        return Err(RarmaError::Inference(format!("invalid Wald subset {subset:?}")));
    }
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(RarmaError::Inference(format!("pfa must be in (0, 1), got {pfa}")));
    }
    let cov = fisher.inverse()?;
    let block = cov.submatrix(subset);
    let chol = Cholesky::new(&block)
        .map_err(|e| RarmaError::Inference(format!("singular interest block: {e}")))?;
    let diff: Vec<T> = subset.iter().zip(gamma0).map(|(&i, &g0)| estimate[i] - g0).collect();
    let solved = chol.solve(&diff);
    let stat = diff
        .iter()
        .zip(&solved)
        .map(|(&a, &b)| (a * b).as_f64())
        .sum::<f64>()
        .max(0.0);
    let df = subset.len();
    let threshold = chi2_quantile(1.0 - pfa, df)?;
    Ok(WaldReport {
        statistic: stat,
        df,
        pfa,
        threshold,
        p_value: chi2_sf(stat, df)?,
        reject: stat > threshold,
        subset: subset.to_vec(),
    })
}

/// Overall significance: all AR and MA coefficients jointly zero.
/// `None` for the constant-mean model, which has nothing to test.
pub fn overall_significance<T: Scalar>(fit: &FitResult<T>, pfa: f64) -> Option<Result<WaldReport>> {
    let subset = fit.spec.dependence_indices();
    if subset.is_empty() {
        return None;
    }
    let zeros = vec![T::zero(); subset.len()];
    Some(wald_test(fit, &subset, &zeros, pfa))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Interval<T> {
    pub label: String,
    pub estimate: T,
    pub se: T,
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> Interval<T> {
    pub fn covers(&self, value: T) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ConfidenceIntervals<T> {
    pub alpha: f64,
    /// `100 (1 - alpha)`.
    pub level_pct: f64,
    pub z: f64,
    pub intervals: Vec<Interval<T>>,
}

/// Symmetric Wald intervals `estimate -/+ z_{1-alpha/2} se`.
pub fn confidence_intervals<T: Scalar>(fit: &FitResult<T>, alpha: f64) -> Result<ConfidenceIntervals<T>> {
    intervals_from_parts(&fit.gamma_hat.to_flat(), &fit.fisher, alpha)
}

pub fn intervals_from_parts<T: Scalar>(
    estimate: &[T],
    fisher: &FisherMatrix<T>,
    alpha: f64,
) -> Result<ConfidenceIntervals<T>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RarmaError::Inference(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let z = std_normal_quantile(1.0 - alpha / 2.0)?;
    let se = fisher.standard_errors()?;
    let zt = T::lit(z);
    let intervals = estimate
        .iter()
        .zip(&se)
        .zip(&fisher.labels)
        .map(|((&est, &s), label)| Interval {
            label: label.clone(),
            estimate: est,
            se: s,
            lower: est - zt * s,
            upper: est + zt * s,
        })
        .collect();
    Ok(ConfidenceIntervals {
        alpha,
        level_pct: 100.0 * (1.0 - alpha),
        z,
        intervals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub sic: f64,
    pub kappa: usize,
}

/// `AIC = -2 l + 2 kappa`, `SIC = -2 l + kappa log(N M)`.
pub fn aic_sic(loglik: f64, kappa: usize, rows: usize, cols: usize) -> InformationCriteria {
    let k = kappa as f64;
    InformationCriteria {
        aic: -2.0 * loglik + 2.0 * k,
        sic: -2.0 * loglik + k * ((rows * cols) as f64).ln(),
        kappa,
    }
}

pub fn information_criteria<T: Scalar>(fit: &FitResult<T>) -> InformationCriteria {
    aic_sic(fit.loglik.as_f64(), fit.n_params(), fit.rows, fit.cols)
}
