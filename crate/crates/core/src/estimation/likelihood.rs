//! Conditional log-likelihood, the recursive `d eta / d gamma` grids and the score.

use crate::error::{RarmaError, Result};
use crate::grid::{Grid, ImageGrid};
use crate::latent::{recurse_latents, LagOffsets, LatentGrids};
use crate::linalg::Matrix;
use crate::model::{ModelSpec, ParamVector};
use crate::scalar::Scalar;

/// `d eta[n,m] / d gamma` for every cell, stored cell-major with the
/// parameter index varying fastest. Border cells hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaGradientState<T> {
    rows: usize,
    cols: usize,
    n_params: usize,
    n_ar: usize,
    values: Vec<T>,
}

impl<T: Scalar> EtaGradientState<T> {
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Gradient of `eta` at one cell, in flat parameter order.
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> &[T] {
        let base = (r * self.cols + c) * self.n_params;
        &self.values[base..base + self.n_params]
    }

    /// Grid of one component `d eta / d gamma_k`.
    pub fn component(&self, k: usize) -> Grid<T> {
        Grid::from_fn(self.rows, self.cols, |r, c| self.at(r, c)[k])
    }

    pub fn d_beta(&self) -> Grid<T> {
        self.component(0)
    }

    pub fn d_phi(&self, a: usize) -> Grid<T> {
        self.component(1 + a)
    }

    pub fn d_theta(&self, b: usize) -> Grid<T> {
        self.component(1 + self.n_ar + b)
    }
}

/// Everything one pass over the grid yields at a fixed `gamma`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation<T> {
    pub latents: LatentGrids<T>,
    pub loglik: T,
    pub gradients: Option<EtaGradientState<T>>,
    pub score: Option<Vec<T>>,
}

pub(crate) fn evaluate<T: Scalar>(
    y: &ImageGrid<T>,
    spec: &ModelSpec,
    gamma: &ParamVector<T>,
    with_derivatives: bool,
) -> Result<Evaluation<T>> {
    let latents = recurse_latents(y, spec, gamma)?;
    let loglik = loglik_from_latents(y, &latents)?;
    if !with_derivatives {
        return Ok(Evaluation {
            latents,
            loglik,
            gradients: None,
            score: None,
        });
    }
    let gradients = gradients_from_latents(y, spec, gamma, &latents);
    let score = score_from_gradients(y, spec, &latents, &gradients);
    Ok(Evaluation {
        latents,
        loglik,
        gradients: Some(gradients),
        score: Some(score),
    })
}

fn loglik_from_latents<T: Scalar>(y: &ImageGrid<T>, latents: &LatentGrids<T>) -> Result<T> {
    let half_pi_ln = (T::PI() / T::lit(2.0)).ln();
    let quarter_pi = T::PI() / T::lit(4.0);
    let mut total = T::zero();
    for (r, c, mu) in latents.interior_mu() {
        if !(mu.is_finite() && mu > T::zero()) {
            return Err(RarmaError::Evaluation(format!(
                "conditional mean {mu} at ({r}, {c})"
            )));
        }
        let yv = y.get(r, c);
        let ratio = yv / mu;
        total += half_pi_ln + yv.ln() - T::lit(2.0) * mu.ln() - quarter_pi * ratio * ratio;
    }
    if !total.is_finite() {
        return Err(RarmaError::Evaluation("log-likelihood is not finite".into()));
    }
    Ok(total)
}

fn gradients_from_latents<T: Scalar>(
    y: &ImageGrid<T>,
    spec: &ModelSpec,
    gamma: &ParamVector<T>,
    latents: &LatentGrids<T>,
) -> EtaGradientState<T> {
    let (rows, cols) = (y.rows(), y.cols());
    let kappa = spec.n_params();
    let n_ar = spec.n_ar();
    let link = spec.link;
    let offsets = LagOffsets::new(spec, gamma, cols);
    let gy: Vec<T> = y.as_slice().iter().map(|&v| link.eval(v)).collect();
    let err = latents.err.as_slice();
    let w = spec.w();

    let mut values = vec![T::zero(); rows * cols * kappa];
    let mut cell = vec![T::zero(); kappa];
    for r in w..rows {
        for c in w..cols {
            let idx = r * cols + c;
            cell[0] = T::one();
            for (a, &(off, _)) in offsets.ar.iter().enumerate() {
                cell[1 + a] = gy[idx - off];
            }
            for (b, &(off, _)) in offsets.ma.iter().enumerate() {
                cell[1 + n_ar + b] = err[idx - off];
            }
            // e = g(y) - eta, so each lagged error feeds back -d eta / d gamma
            for &(off, theta) in &offsets.ma {
                let lagged = (idx - off) * kappa;
                for (k, v) in cell.iter_mut().enumerate() {
                    *v -= theta * values[lagged + k];
                }
            }
            values[idx * kappa..(idx + 1) * kappa].copy_from_slice(&cell);
        }
    }
    EtaGradientState {
        rows,
        cols,
        n_params: kappa,
        n_ar,
        values,
    }
}

fn score_from_gradients<T: Scalar>(
    y: &ImageGrid<T>,
    spec: &ModelSpec,
    latents: &LatentGrids<T>,
    grads: &EtaGradientState<T>,
) -> Vec<T> {
    let mut score = vec![T::zero(); spec.n_params()];
    let half_pi = T::PI() / T::lit(2.0);
    for (r, c, mu) in latents.interior_mu() {
        let yv = y.get(r, c);
        let dl_dmu = half_pi * yv * yv / (mu * mu * mu) - T::lit(2.0) / mu;
        let factor = dl_dmu * spec.link.dmu_deta(mu);
        for (s, &d) in score.iter_mut().zip(grads.at(r, c)) {
            *s += factor * d;
        }
    }
    score
}

/// Expected conditional information `sum_cells w * grad(eta) grad(eta)^T`
/// with `w = (4 / mu^2) (d mu / d eta)^2`.
pub(crate) fn expected_information<T: Scalar>(
    spec: &ModelSpec,
    latents: &LatentGrids<T>,
    grads: &EtaGradientState<T>,
) -> Matrix<T> {
    let k = spec.n_params();
    let mut info = Matrix::zeros(k, k);
    for (r, c, mu) in latents.interior_mu() {
        let dmu = spec.link.dmu_deta(mu);
        let weight = T::lit(4.0) / (mu * mu) * dmu * dmu;
        let d = grads.at(r, c);
        for i in 0..k {
            let wi = weight * d[i];
            for j in 0..=i {
                info.add_at(i, j, wi * d[j]);
            }
        }
    }
    info.symmetrize_from_lower();
    info
}

/// Log-likelihood conditional on the first `w` rows and columns.
pub fn conditional_loglik<T: Scalar>(
    y: &ImageGrid<T>,
    spec: &ModelSpec,
    gamma: &ParamVector<T>,
) -> Result<T> {
    Ok(evaluate(y, spec, gamma, false)?.loglik)
}

/// The three MA-feedback recursions for `d eta / d (beta, phi, theta)`,
/// zero-seeded on the border.
pub fn eta_gradients<T: Scalar>(
    y: &ImageGrid<T>,
    spec: &ModelSpec,
    gamma: &ParamVector<T>,
) -> Result<EtaGradientState<T>> {
    let latents = recurse_latents(y, spec, gamma)?;
    Ok(gradients_from_latents(y, spec, gamma, &latents))
}

/// Analytic score vector `d l / d gamma` in flat parameter order.
pub fn score<T: Scalar>(y: &ImageGrid<T>, spec: &ModelSpec, gamma: &ParamVector<T>) -> Result<Vec<T>> {
    Ok(evaluate(y, spec, gamma, true)?
        .score
        .expect("derivatives requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rows: usize, cols: usize, seed: u64) -> ImageGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..rows * cols).map(|_| rng.random_range(0.1..2.5)).collect();
        ImageGrid::new(rows, cols, vals).unwrap()
    }

    fn rarma11() -> (ModelSpec, ParamVector<f64>) {
        let spec = ModelSpec::new(1, 1);
        let g = ParamVector::new(
            &spec,
            0.3569,
            vec![0.2155, 0.2032, 0.15],
            vec![0.1529, 0.1744, 0.1998],
        )
        .unwrap();
        (spec, g)
    }

    #[test]
    fn single_cell_closed_form() {
        let spec = ModelSpec::new(0, 0);
        let y = ImageGrid::new(1, 1, vec![1.0]).unwrap();
        let ll = conditional_loglik(&y, &spec, &ParamVector::zeros(&spec)).unwrap();
        let expected = (std::f64::consts::PI / 2.0).ln() - std::f64::consts::PI / 4.0;
        assert!((ll - expected).abs() < 1e-15);
        assert!((ll + 0.333_815_458_107_993_46).abs() < 1e-14);
    }

    #[test]
    fn beta_stationary_point_for_constant_mean() {
        let spec = ModelSpec::new(0, 0);
        let y = random_image(7, 9, 4);
        let n = 63.0;
        let sum_sq: f64 = y.as_slice().iter().map(|v| v * v).sum();
        let mu_star = (std::f64::consts::PI * sum_sq / (4.0 * n)).sqrt();
        let g = ParamVector::new(&spec, mu_star.ln(), vec![], vec![]).unwrap();
        let s = score(&y, &spec, &g).unwrap();
        assert!(s[0].abs() < 1e-10, "score {s:?}");
        let ll0 = conditional_loglik(&y, &spec, &g).unwrap();
        for d in [-1e-3, 1e-3] {
            let gd = ParamVector::new(&spec, mu_star.ln() + d, vec![], vec![]).unwrap();
            assert!(conditional_loglik(&y, &spec, &gd).unwrap() < ll0);
        }
    }

    #[test]
    fn ar_only_gradients_collapse() {
        let spec = ModelSpec::new(1, 0);
        let g = ParamVector::new(&spec, -0.2, vec![0.3, 0.2, -0.1], vec![]).unwrap();
        let y = random_image(6, 7, 8);
        let st = eta_gradients(&y, &spec, &g).unwrap();
        for r in 1..6 {
            for c in 1..7 {
                assert_eq!(st.d_beta().get(r, c), 1.0);
                assert_eq!(st.d_phi(0).get(r, c), y.get(r, c - 1).ln());
                assert_eq!(st.d_phi(1).get(r, c), y.get(r - 1, c).ln());
                assert_eq!(st.d_phi(2).get(r, c), y.get(r - 1, c - 1).ln());
            }
        }
        assert_eq!(st.d_beta().get(0, 3), 0.0);
    }

    #[test]
    fn eta_gradients_match_finite_differences() {
        let (spec, g) = rarma11();
        let y = random_image(12, 10, 21);
        let st = eta_gradients(&y, &spec, &g).unwrap();
        let flat = g.to_flat();
        let h = 1e-6;
        for k in 0..spec.n_params() {
            let mut up = flat.clone();
            up[k] += h;
            let mut dn = flat.clone();
            dn[k] -= h;
            let eu = recurse_latents(&y, &spec, &ParamVector::from_flat(&spec, &up).unwrap()).unwrap();
            let ed = recurse_latents(&y, &spec, &ParamVector::from_flat(&spec, &dn).unwrap()).unwrap();
            let comp = st.component(k);
            let mut worst: f64 = 0.0;
            for r in 1..12 {
                for c in 1..10 {
                    let fd = (eu.eta.get(r, c) - ed.eta.get(r, c)) / (2.0 * h);
                    let an = comp.get(r, c);
                    worst = worst.max((fd - an).abs() / an.abs().max(1e-2));
                }
            }
            assert!(worst <= 1e-5, "component {k}: {worst}");
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        let (spec, g) = rarma11();
        let y = random_image(15, 15, 5);
        let s = score(&y, &spec, &g).unwrap();
        let flat = g.to_flat();
        let h = 1e-6;
        for k in 0..flat.len() {
            let mut up = flat.clone();
            up[k] += h;
            let mut dn = flat.clone();
            dn[k] -= h;
            let lu = conditional_loglik(&y, &spec, &ParamVector::from_flat(&spec, &up).unwrap()).unwrap();
            let ld = conditional_loglik(&y, &spec, &ParamVector::from_flat(&spec, &dn).unwrap()).unwrap();
            let fd = (lu - ld) / (2.0 * h);
            assert!((fd - s[k]).abs() / s[k].abs().max(1.0) <= 1e-5, "k={k} fd={fd} an={}", s[k]);
        }
    }

    #[test]
    fn information_is_symmetric_and_log_link_weights_are_four() {
        let (spec, g) = rarma11();
        let y = random_image(10, 10, 2);
        let ev = evaluate(&y, &spec, &g, true).unwrap();
        let info = expected_information(&spec, &ev.latents, ev.gradients.as_ref().unwrap());
        assert_eq!(info.max_asymmetry(), 0.0);
        let spec0 = ModelSpec::new(0, 0);
        let ev0 = evaluate(&y, &spec0, &ParamVector::zeros(&spec0), true).unwrap();
        let info0 = expected_information(&spec0, &ev0.latents, ev0.gradients.as_ref().unwrap());
        assert!((info0.get(0, 0) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn exploding_mean_is_an_evaluation_error() {
        let spec = ModelSpec::new(0, 0);
        let y = random_image(3, 3, 1);
        let g = ParamVector::new(&spec, 1e4, vec![], vec![]).unwrap();
        assert!(matches!(
            conditional_loglik(&y, &spec, &g),
            Err(RarmaError::Evaluation(_))
        ));
    }
}
