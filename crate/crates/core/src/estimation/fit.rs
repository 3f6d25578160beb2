use serde::{Deserialize, Serialize};

use crate::error::{RarmaError, Result};
use crate::estimation::bfgs::{minimize, BfgsOptions, Objective, StopReason};
use crate::estimation::init::initial_values;
use crate::estimation::likelihood::{evaluate, expected_information};
use crate::grid::{Grid, ImageGrid};
use crate::latent::LatentGrids;
use crate::inference::FisherMatrix;
use crate::linalg::spd_inverse;
use crate::model::{ModelSpec, ParamVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct FitOptions<T> {
    pub max_iter: usize,
    /// Tolerance on the largest score component divided by the interior cell count.
    pub grad_tol: T,
    pub step_tol: T,
    /// Starting point; least squares when absent.
    pub start: Option<ParamVector<T>>,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: T::lit(1e-6),
            step_tol: T::lit(1e-10),
            start: None,
        }
    }
}

/// Conditional maximum likelihood fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct FitResult<T> {
    pub spec: ModelSpec,
    pub gamma_hat: ParamVector<T>,
    pub start: ParamVector<T>,
    pub loglik: T,
    pub score: Vec<T>,
    /// `max_i |U_i| / n_obs` at `gamma_hat`.
    pub score_norm: T,
    /// Expected conditional information at `gamma_hat`.
    pub fisher: FisherMatrix<T>,
    pub latents: LatentGrids<T>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub n_obs: usize,
    pub rows: usize,
    pub cols: usize,
    pub loglik_trace: Vec<T>,
}

impl<T: Scalar> FitResult<T> {
    /// Fitted conditional means; NaN on the border.
    pub fn mu_hat(&self) -> &Grid<T> {
        &self.latents.mu
    }

    pub fn n_params(&self) -> usize {
        self.spec.n_params()
    }
}

struct CmleObjective<'a, T: Scalar> {
    y: &'a ImageGrid<T>,
    spec: &'a ModelSpec,
    n_obs: T,
}

impl<T: Scalar> CmleObjective<'_, T> {
    fn params(&self, x: &[T]) -> Option<ParamVector<T>> {
        ParamVector::from_flat(self.spec, x).ok()
    }
}

impl<T: Scalar> Objective<T> for CmleObjective<'_, T> {
    fn value(&mut self, x: &[T]) -> Option<T> {
        let g = self.params(x)?;
        evaluate(self.y, self.spec, &g, false)
            .ok()
            .map(|e| -e.loglik / self.n_obs)
    }

    fn value_and_gradient(&mut self, x: &[T]) -> Option<(T, Vec<T>)> {
        let g = self.params(x)?;
        let e = evaluate(self.y, self.spec, &g, true).ok()?;
        let grad = e.score?.into_iter().map(|s| -s / self.n_obs).collect::<Vec<_>>();
        grad.iter().all(|v| v.is_finite()).then_some((-e.loglik / self.n_obs, grad))
    }
}

/// Maximizes the conditional log-likelihood by BFGS with the analytic score.
///
/// The inverse Hessian is seeded with the inverse expected information at
/// the starting point. Non-convergence is reported through `converged`,
/// not as an error; an error means no valid starting point exists.
pub fn fit_cmle<T: Scalar>(
    y: &ImageGrid<T>,
    spec: &ModelSpec,
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    spec.check_grid(y.rows(), y.cols())?;
    let n_obs = spec.interior_count(y.rows(), y.cols());
    let mut obj = CmleObjective {
        y,
        spec,
        n_obs: T::from_usize_lossy(n_obs),
    };

    let mut candidates = Vec::new();
    if let Some(s) = &opts.start {
        s.check(spec)?;
        candidates.push(s.clone());
    }
    let ols = initial_values(y, spec)?;
    let mut mean_only = ParamVector::zeros(spec);
    mean_only.beta = T::lit(
        y.as_slice().iter().map(|&v| spec.link.eval(v).as_f64()).sum::<f64>() / y.as_slice().len() as f64,
    );
    candidates.push(ols);
    candidates.push(mean_only);
    let start = candidates
        .into_iter()
        .find(|c| obj.value_and_gradient(&c.to_flat()).is_some())
        .ok_or_else(|| RarmaError::Evaluation("no starting point with a finite likelihood".into()))?;

    let h0 = evaluate(y, spec, &start, true).ok().and_then(|e| {
        let info = expected_information(spec, &e.latents, e.gradients.as_ref()?);
        spd_inverse(&info.scale(obj.n_obs.recip())).ok().map(|(inv, _)| inv)
    });
    let bfgs = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        step_tol: opts.step_tol,
    };
    let out = minimize(&mut obj, start.to_flat(), h0, &bfgs);
    if out.reason == StopReason::InvalidStart {
        return Err(RarmaError::Evaluation("starting point became invalid".into()));
    }

    let gamma_hat = ParamVector::from_flat(spec, &out.x)?;
    let ev = evaluate(y, spec, &gamma_hat, true)?;
    let grads = ev.gradients.as_ref().expect("derivatives requested");
    let fisher = FisherMatrix::new(spec, expected_information(spec, &ev.latents, grads));
    let score = ev.score.clone().expect("derivatives requested");
    let score_norm = score.iter().fold(T::zero(), |m, s| m.max(s.abs())) / obj.n_obs;
    if !out.reason.converged() {
        log::debug!("fit stopped without convergence: {:?}", out.reason);
    }
    Ok(FitResult {
        spec: *spec,
        gamma_hat,
        start,
        loglik: ev.loglik,
        score,
        score_norm,
        fisher,
        latents: ev.latents,
        converged: out.reason.converged(),
        stop_reason: out.reason,
        iterations: out.iterations,
        n_obs,
        rows: y.rows(),
        cols: y.cols(),
        loglik_trace: out.trace.into_iter().map(|f| -f * obj.n_obs).collect(),
    })
}
