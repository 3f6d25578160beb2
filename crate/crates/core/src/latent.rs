//! The causal RARMA recursion producing `eta`, `mu` and the MA errors.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Grid, ImageGrid};
use crate::model::{ModelSpec, ParamVector};
use crate::scalar::Scalar;

/// Linear predictor, conditional mean and MA error grids.
///
/// Border cells (`r < w` or `c < w`) have no prediction: `eta` and `mu` hold
/// NaN there and `err` holds zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct LatentGrids<T> {
    pub eta: Grid<T>,
    pub mu: Grid<T>,
    pub err: Grid<T>,
    pub w: usize,
}

impl<T: Scalar> LatentGrids<T> {
    pub fn rows(&self) -> usize {
        self.mu.rows()
    }

    pub fn cols(&self) -> usize {
        self.mu.cols()
    }

    #[inline]
    pub fn is_interior(&self, r: usize, c: usize) -> bool {
        r >= self.w && c >= self.w
    }

    /// `(r, c, mu)` for each interior cell in row-major order.
    pub fn interior_mu(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let w = self.w;
        (w..self.rows()).flat_map(move |r| (w..self.cols()).map(move |c| (r, c, self.mu.get(r, c))))
    }

    pub fn all_finite(&self) -> bool {
        self.interior_mu().all(|(_, _, m)| m.is_finite() && m > T::zero())
    }
}

/// Flat-offset form of the lag sets for a grid with `cols` columns.
pub(crate) struct LagOffsets<T> {
    pub ar: Vec<(usize, T)>,
    pub ma: Vec<(usize, T)>,
}

impl<T: Scalar> LagOffsets<T> {
    pub fn new(spec: &ModelSpec, gamma: &ParamVector<T>, cols: usize) -> Self {
        let ar = spec
            .ar_lags()
            .into_iter()
            .zip(gamma.phi.iter())
            .map(|((i, j), &v)| (i * cols + j, v))
            .collect();
        let ma = spec
            .ma_lags()
            .into_iter()
            .zip(gamma.theta.iter())
            .map(|((k, l), &v)| (k * cols + l, v))
            .collect();
        Self { ar, ma }
    }
}

/// Runs the recursion over `y` row-major; every MA error a cell refers to
/// lies strictly north-west and is therefore already computed.
pub fn recurse_latents<T: Scalar>(
    y: &ImageGrid<T>,
    spec: &ModelSpec,
    gamma: &ParamVector<T>,
) -> Result<LatentGrids<T>> {
    gamma.check(spec)?;
    let (rows, cols) = (y.rows(), y.cols());
    spec.check_grid(rows, cols)?;
    let link = spec.link;
    let gy: Vec<T> = y.as_slice().iter().map(|&v| link.eval(v)).collect();
    let offsets = LagOffsets::new(spec, gamma, cols);
    let w = spec.w();

    let mut eta = vec![T::nan(); rows * cols];
    let mut mu = vec![T::nan(); rows * cols];
    let mut err = vec![T::zero(); rows * cols];
    for r in w..rows {
        for c in w..cols {
            let idx = r * cols + c;
            let mut e = gamma.beta;
            for &(off, phi) in &offsets.ar {
                e += phi * gy[idx - off];
            }
            for &(off, theta) in &offsets.ma {
                e += theta * err[idx - off];
            }
            let m = link.eval_inverse(e);
            eta[idx] = e;
            mu[idx] = m;
            err[idx] = gy[idx] - link.eval(m);
        }
    }
    Ok(LatentGrids {
        eta: Grid::new(rows, cols, eta)?,
        mu: Grid::new(rows, cols, mu)?,
        err: Grid::new(rows, cols, err)?,
        w,
    })
}

/// Fitted signal restricted to interior cells: an `(N - w) x (M - w)` image.
pub fn fitted_image<T: Scalar>(latents: &LatentGrids<T>) -> Result<ImageGrid<T>> {
    let w = latents.w;
    let grid = latents
        .mu
        .crop(w, w, latents.rows() - w, latents.cols() - w)?;
    ImageGrid::from_grid(grid)
}
