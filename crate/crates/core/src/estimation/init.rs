//! Starting values: least squares of `g(y)` on its AR lags, MA part at zero.

use crate::error::Result;
use crate::grid::ImageGrid;
use crate::linalg::{Cholesky, Matrix};
use crate::model::{ModelSpec, ParamVector};
use crate::scalar::Scalar;

/// Initial `(beta, phi)` from ordinary least squares over the interior cells,
/// `theta = 0`. Rows of the design are interior cells in row-major order and
/// columns follow the `phi` layout. A rank-deficient design falls back to
/// `beta = mean g(y)`, `phi = 0`.
pub fn initial_values<T: Scalar>(y: &ImageGrid<T>, spec: &ModelSpec) -> Result<ParamVector<T>> {
    let (rows, cols) = (y.rows(), y.cols());
    spec.check_grid(rows, cols)?;
    let w = spec.w();
    let link = spec.link;
    let lags = spec.ar_lags();
    let k = lags.len();
    let n = spec.interior_count(rows, cols) as f64;
    let mut out = ParamVector::zeros(spec);

    let gy = |r: usize, c: usize| link.eval(y.get(r, c)).as_f64();
    let response_mean = (w..rows)
        .flat_map(|r| (w..cols).map(move |c| (r, c)))
        .map(|(r, c)| gy(r, c))
        .sum::<f64>()
        / n;
    let fallback = |mut out: ParamVector<T>| {
        out.beta = T::lit(response_mean);
        out
    };
    if k == 0 {
        return Ok(fallback(out));
    }
    if (n as usize) <= k + 1 {
        log::warn!("initial values: {n} interior cells cannot identify {k} AR lags, using the mean");
        return Ok(fallback(out));
    }

    // Centered normal equations in f64.
    let mut means = vec![0.0; k];
    for r in w..rows {
        for c in w..cols {
            for (a, &(i, j)) in lags.iter().enumerate() {
                means[a] += gy(r - i, c - j);
            }
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut sxx = Matrix::<f64>::zeros(k, k);
    let mut sxy = vec![0.0; k];
    let mut x = vec![0.0; k];
    for r in w..rows {
        for c in w..cols {
            for (a, &(i, j)) in lags.iter().enumerate() {
                x[a] = gy(r - i, c - j) - means[a];
            }
            let resp = gy(r, c) - response_mean;
            for a in 0..k {
                sxy[a] += x[a] * resp;
                for b in 0..=a {
                    sxx.add_at(a, b, x[a] * x[b]);
                }
            }
        }
    }
    sxx.symmetrize_from_lower();
    let scale = sxx.diagonal().into_iter().fold(0.0, f64::max);
    if !(scale > 1e-12 * n) {
        log::warn!("initial values: lagged design is constant, using the mean");
        return Ok(fallback(out));
    }
    let chol = match Cholesky::new(&sxx) {
        Ok(c) => c,
        Err(_) => {
            log::warn!("initial values: rank-deficient lagged design, using the mean");
            return Ok(fallback(out));
        }
    };
    let phi = chol.solve(&sxy);
    if !phi.iter().all(|v| v.is_finite()) {
        return Ok(fallback(out));
    }
    let beta = response_mean - phi.iter().zip(&means).map(|(p, m)| p * m).sum::<f64>();
    out.beta = T::lit(beta);
    out.phi = phi.into_iter().map(T::lit).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_falls_back_to_mean() {
        let spec = ModelSpec::new(1, 1);
        let y = ImageGrid::new(6, 6, vec![2.5; 36]).unwrap();
        let g = initial_values(&y, &spec).unwrap();
        assert!((g.beta - 2.5f64.ln()).abs() < 1e-14);
        assert!(g.phi.iter().all(|&v| v == 0.0));
        assert!(g.theta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_linear_relation_is_recovered() {
        // log y follows an exact AR relation with alternating seeds along the border
        let spec = ModelSpec::new(1, 0);
        let (rows, cols) = (12, 12);
        let mut ly = vec![0.0f64; rows * cols];
        let mut s = 1u64;
        for r in 0..rows {
            for c in 0..cols {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let noise = ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
                ly[r * cols + c] = if r == 0 || c == 0 {
                    noise
                } else {
                    0.1 + 0.4 * ly[r * cols + c - 1] + 0.3 * ly[(r - 1) * cols + c]
                        - 0.2 * ly[(r - 1) * cols + c - 1]
                        + 0.01 * noise
                };
            }
        }
        let y = ImageGrid::new(rows, cols, ly.iter().map(|v| v.exp()).collect()).unwrap();
        let g = initial_values(&y, &spec).unwrap();
        assert!((g.beta - 0.1).abs() < 0.02);
        for (got, want) in g.phi.iter().zip([0.4, 0.3, -0.2]) {
            assert!((got - want).abs() < 0.05, "{got} vs {want}");
        }
    }
}
