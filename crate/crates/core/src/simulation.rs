//! Inversion-method generation of RARMA fields and the Monte Carlo harness
//! measuring mean, relative bias, MSE and interval coverage of the CMLE.

use std::fmt::Write as _;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RarmaError, Result};
use crate::estimation::{fit_cmle, FitOptions};
use crate::grid::ImageGrid;
use crate::inference::confidence_intervals;
use crate::latent::LagOffsets;
use crate::model::{ModelSpec, ParamVector};
use crate::rayleigh::quantile_unchecked;
use crate::scalar::Scalar;

/// Independent, reproducible stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws an `rows x cols` field.
///
/// Cells are generated row-major. Border cells (`r < w` or `c < w`) use
/// `mu = g^-1(beta)` and contribute a zero MA error; every other cell gets
/// its mean from the recursion over already generated values and is drawn
/// as `y = F^-1(u; mu)` with `u ~ U(0, 1)`.
pub fn simulate_field<T: Scalar, R: Rng + ?Sized>(
    spec: &ModelSpec,
    gamma: &ParamVector<T>,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<ImageGrid<T>> {
    gamma.check(spec)?;
    spec.check_grid(rows, cols)?;
    let link = spec.link;
    let w = spec.w();
    let offsets = LagOffsets::new(spec, gamma, cols);
    let border_mu = link.eval_inverse(gamma.beta);
    let mut y = vec![T::zero(); rows * cols];
    let mut gy = vec![T::zero(); rows * cols];
    let mut err = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            let interior = r >= w && c >= w;
            let mu = if interior {
                let mut eta = gamma.beta;
                for &(off, phi) in &offsets.ar {
                    eta += phi * gy[idx - off];
                }
                for &(off, theta) in &offsets.ma {
                    eta += theta * err[idx - off];
                }
                link.eval_inverse(eta)
            } else {
                border_mu
            };
            if !(mu.is_finite() && mu > T::zero()) {
                return Err(RarmaError::Evaluation(format!(
                    "simulated mean {mu} at ({r}, {c}); parameters may be explosive"
                )));
            }
            let u: f64 = rng.sample(Open01);
            // a draw can underflow to zero in single precision
            let v = quantile_unchecked(T::lit(u), mu).max(T::min_positive_value());
            y[idx] = v;
            gy[idx] = link.eval(v);
            if interior {
                err[idx] = gy[idx] - link.eval(mu);
            }
        }
    }
    ImageGrid::new(rows, cols, y)
}

/// Simulates `(rows + burn_in) x (cols + burn_in)` cells and keeps the
/// bottom-right `rows x cols` block.
pub fn simulate_field_burned<T: Scalar, R: Rng + ?Sized>(
    spec: &ModelSpec,
    gamma: &ParamVector<T>,
    rows: usize,
    cols: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<ImageGrid<T>> {
    let full = simulate_field(spec, gamma, rows + burn_in, cols + burn_in, rng)?;
    if burn_in == 0 {
        return Ok(full);
    }
    full.crop(burn_in, burn_in, rows, cols)
}

/// The two reference designs.
pub mod scenarios {
    use super::*;

    /// RARMA(1,0) with `beta = -0.2031`, `phi = (0.4562, 0.4523, -0.1054)`.
    pub fn rarma10() -> (ModelSpec, ParamVector<f64>) {
        let spec = ModelSpec::new(1, 0);
        let g = ParamVector::new(&spec, -0.2031, vec![0.4562, 0.4523, -0.1054], vec![])
            .expect("valid scenario");
        (spec, g)
    }

    /// RARMA(1,1) with `beta = 0.3569`, `phi = (0.2155, 0.2032, 0.1500)`,
    /// `theta = (0.1529, 0.1744, 0.1998)`.
    pub fn rarma11() -> (ModelSpec, ParamVector<f64>) {
        let spec = ModelSpec::new(1, 1);
        let g = ParamVector::new(
            &spec,
            0.3569,
            vec![0.2155, 0.2032, 0.1500],
            vec![0.1529, 0.1744, 0.1998],
        )
        .expect("valid scenario");
        (spec, g)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub spec: ModelSpec,
    pub gamma_true: ParamVector<f64>,
    pub sizes: Vec<(usize, usize)>,
    pub replications: usize,
    pub seed: u64,
    /// Extra rows/cols simulated and cropped before fitting.
    #[serde(default)]
    pub burn_in: usize,
    /// Interval level used for coverage is `1 - alpha`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.05
}

impl Scenario {
    pub fn new(name: &str, spec: ModelSpec, gamma_true: ParamVector<f64>) -> Result<Self> {
        gamma_true.check(&spec)?;
        Ok(Self {
            name: name.to_string(),
            spec,
            gamma_true,
            sizes: vec![(10, 10), (20, 20), (40, 40), (80, 80)],
            replications: 1000,
            seed: 2024,
            burn_in: 0,
            alpha: 0.05,
        })
    }

    pub fn rarma10() -> Self {
        let (spec, g) = scenarios::rarma10();
        Self::new("rarma10", spec, g).expect("valid scenario")
    }

    pub fn rarma11() -> Self {
        let (spec, g) = scenarios::rarma11();
        Self::new("rarma11", spec, g).expect("valid scenario")
    }

    pub fn with_sizes(mut self, sizes: &[usize]) -> Self {
        self.sizes = sizes.iter().map(|&s| (s, s)).collect();
        self
    }

    pub fn with_replications(mut self, reps: usize) -> Self {
        self.replications = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// One fitted replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covered: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSummary {
    pub label: String,
    pub truth: f64,
    pub mean: f64,
    /// `100 (mean - truth) / truth`.
    pub rb_pct: f64,
    pub mse: f64,
    /// Fraction of replications whose interval covers `truth`.
    pub cr: f64,
    /// Sample variance of the estimates.
    pub variance: f64,
    /// Average of the asymptotic variances `diag I^-1`.
    pub mean_asymptotic_variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSummary {
    pub rows: usize,
    pub cols: usize,
    pub requested: usize,
    /// Replications whose fit errored, did not converge, or had a singular information matrix.
    pub failures: usize,
    pub params: Vec<ParamSummary>,
    pub total_abs_rb: f64,
    pub total_mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McSummary {
    pub scenario: String,
    pub spec: ModelSpec,
    pub sizes: Vec<SizeSummary>,
}

/// Fits one simulated replication; `None` when it counts as a failure.
pub fn run_replication<T: Scalar>(
    scenario: &Scenario,
    size_index: usize,
    index: usize,
) -> Option<Replication> {
    let (rows, cols) = scenario.sizes[size_index];
    let stream = ((size_index as u64) << 40) | index as u64;
    let mut rng = stream_rng(scenario.seed, stream);
    let gamma: ParamVector<T> = scenario.gamma_true.cast();
    let y = simulate_field_burned(&scenario.spec, &gamma, rows, cols, scenario.burn_in, &mut rng).ok()?;
    let fit = fit_cmle(&y, &scenario.spec, &FitOptions::default()).ok()?;
    if !fit.converged {
        return None;
    }
    let ci = confidence_intervals(&fit, scenario.alpha).ok()?;
    let truth = scenario.gamma_true.to_flat();
    Some(Replication {
        index,
        estimates: ci.intervals.iter().map(|iv| iv.estimate.as_f64()).collect(),
        std_errors: ci.intervals.iter().map(|iv| iv.se.as_f64()).collect(),
        covered: ci
            .intervals
            .iter()
            .zip(&truth)
            .map(|(iv, &t)| iv.lower.as_f64() <= t && t <= iv.upper.as_f64())
            .collect(),
    })
}

/// Summarizes successful replications against the true parameters.
pub fn summarize(
    spec: &ModelSpec,
    truth: &[f64],
    rows: usize,
    cols: usize,
    requested: usize,
    reps: &[Replication],
) -> SizeSummary {
    let labels = spec.labels();
    let n = reps.len() as f64;
    let params: Vec<ParamSummary> = labels
        .into_iter()
        .enumerate()
        .map(|(k, label)| {
            let t = truth[k];
            if reps.is_empty() {
                return ParamSummary {
                    label,
                    truth: t,
                    mean: f64::NAN,
                    rb_pct: f64::NAN,
                    mse: f64::NAN,
                    cr: f64::NAN,
                    variance: f64::NAN,
                    mean_asymptotic_variance: f64::NAN,
                };
            }
            let mean = reps.iter().map(|r| r.estimates[k]).sum::<f64>() / n;
            let mse = reps.iter().map(|r| (r.estimates[k] - t).powi(2)).sum::<f64>() / n;
            let variance = if reps.len() > 1 {
                reps.iter().map(|r| (r.estimates[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            ParamSummary {
                label,
                truth: t,
                mean,
                rb_pct: 100.0 * (mean - t) / t,
                mse,
                cr: reps.iter().filter(|r| r.covered[k]).count() as f64 / n,
                variance,
                mean_asymptotic_variance: reps.iter().map(|r| r.std_errors[k].powi(2)).sum::<f64>() / n,
            }
        })
        .collect();
    SizeSummary {
        rows,
        cols,
        requested,
        failures: requested - reps.len(),
        total_abs_rb: params.iter().map(|p| p.rb_pct.abs()).sum(),
        total_mse: params.iter().map(|p| p.mse).sum(),
        params,
    }
}

/// Simulate, fit and summarize every size of `scenario`.
///
/// Replications run in parallel on the current rayon pool. Each replication
/// draws from its own stream derived from `(seed, size, index)`, and results
/// are reduced in index order, so the summary does not depend on scheduling.
pub fn run_monte_carlo<T: Scalar>(scenario: &Scenario) -> Result<McSummary> {
    scenario.gamma_true.check(&scenario.spec)?;
    for &(r, c) in &scenario.sizes {
        scenario.spec.check_grid(r, c)?;
    }
    let truth = scenario.gamma_true.to_flat();
    let mut sizes = Vec::with_capacity(scenario.sizes.len());
    for (s, &(rows, cols)) in scenario.sizes.iter().enumerate() {
        let mut reps: Vec<Replication> = (0..scenario.replications)
            .into_par_iter()
            .filter_map(|i| run_replication::<T>(scenario, s, i))
            .collect();
        reps.sort_by_key(|r| r.index);
        let summary = summarize(&scenario.spec, &truth, rows, cols, scenario.replications, &reps);
        if summary.failures > 0 {
            log::info!("{rows}x{cols}: {} of {} replications failed", summary.failures, scenario.replications);
        }
        sizes.push(summary);
    }
    Ok(McSummary {
        scenario: scenario.name.clone(),
        spec: scenario.spec,
        sizes,
    })
}

impl McSummary {
    /// One row per parameter and size, plus a `total` row per size holding
    /// the summed `|RB%|` and MSE.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,measure,truth,mean,rb_pct,mse,cr,failures\n");
        for s in &self.sizes {
            let size = format!("{}x{}", s.rows, s.cols);
            for p in &s.params {
                let _ = writeln!(
                    out,
                    "{size},\"{}\",{},{:.6},{:.4},{:.6},{:.4},{}",
                    p.label, p.truth, p.mean, p.rb_pct, p.mse, p.cr, s.failures
                );
            }
            let _ = writeln!(
                out,
                "{size},total,,,{:.4},{:.6},,{}",
                s.total_abs_rb, s.total_mse, s.failures
            );
        }
        out
    }
}
