//! Dense row-major grids.
//!
//! Storage is 0-based: cell `(r, c)` holds the pixel the model equations call
//! `[n, m] = [r + 1, c + 1]`. A cell is *interior* for a model with
//! `w = max(p, q)` when `r >= w && c >= w`.

use serde::{Deserialize, Serialize};

use crate::error::{RarmaError, Result};
use crate::scalar::Scalar;

/// Amplitude floor applied to zero pixels at ingestion.
pub const DEFAULT_AMPLITUDE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(RarmaError::Dimension(format!(
                "grid dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if rows * cols != data.len() {
            return Err(RarmaError::Dimension(format!(
                "{rows}x{cols} grid needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Counterclockwise quarter turn. An `N x M` grid becomes `M x N` with
    /// `out[i][j] = in[j][M - 1 - i]`.
    pub fn rotate90(&self) -> Self {
        let (n, m) = (self.rows, self.cols);
        Grid::from_fn(m, n, |i, j| self.get(j, m - 1 - i))
    }

    /// `k` counterclockwise quarter turns (`k` taken mod 4).
    pub fn rotate90_times(&self, k: usize) -> Self {
        match k % 4 {
            0 => self.clone(),
            1 => self.rotate90(),
            2 => {
                let (n, m) = (self.rows, self.cols);
                Grid::from_fn(n, m, |i, j| self.get(n - 1 - i, m - 1 - j))
            }
            _ => {
                let (n, m) = (self.rows, self.cols);
                Grid::from_fn(m, n, |i, j| self.get(n - 1 - j, i))
            }
        }
    }

    pub fn transpose(&self) -> Self {
        Grid::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Sub-grid of `height x width` cells starting at `(row0, col0)`.
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || row0 + height > self.rows || col0 + width > self.cols {
            return Err(RarmaError::Dimension(format!(
                "crop {height}x{width} at ({row0},{col0}) exceeds {}x{} grid",
                self.rows, self.cols
            )));
        }
        Ok(Grid::from_fn(height, width, |r, c| self.get(row0 + r, col0 + c)))
    }
}

/// Maps a cell of `rotate90_times(k)` output back to the un-rotated frame of
/// an `rows x cols` grid.
pub fn unrotate_index(k: usize, rows: usize, cols: usize, i: usize, j: usize) -> (usize, usize) {
    match k % 4 {
        0 => (i, j),
        1 => (j, cols - 1 - i),
        2 => (rows - 1 - i, cols - 1 - j),
        _ => (rows - 1 - j, i),
    }
}

/// Field of strictly positive, finite amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Grid<T>", into = "Grid<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ImageGrid<T: Scalar> {
    grid: Grid<T>,
}

impl<T: Scalar> ImageGrid<T> {
    pub fn new(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        Self::from_grid(Grid::new(rows, cols, values)?)
    }

    pub fn from_grid(grid: Grid<T>) -> Result<Self> {
        if let Some((idx, v)) = grid
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > T::zero()))
        {
            return Err(RarmaError::Domain(format!(
                "amplitude at ({}, {}) must be finite and > 0, got {v}",
                idx / grid.cols(),
                idx % grid.cols()
            )));
        }
        Ok(Self { grid })
    }

    /// Builds a field from raw amplitudes, raising values `<= 0` to `floor`.
    /// Returns the field and the number of clamped cells. Non-finite values
    /// are still rejected.
    pub fn from_amplitudes_clamped(
        rows: usize,
        cols: usize,
        mut values: Vec<T>,
        floor: T,
    ) -> Result<(Self, usize)> {
        if !(floor > T::zero()) {
            return Err(RarmaError::Domain(format!("amplitude floor must be > 0, got {floor}")));
        }
        let mut clamped = 0;
        for v in values.iter_mut() {
            if v.is_finite() && *v <= T::zero() {
                *v = floor;
                clamped += 1;
            }
        }
        if clamped > 0 {
            log::warn!("clamped {clamped} non-positive amplitudes to {floor}");
        }
        Ok((Self::new(rows, cols, values)?, clamped))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.grid.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.grid.cols()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.grid.get(r, c)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        self.grid.as_slice()
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn into_grid(self) -> Grid<T> {
        self.grid
    }

    pub fn rotate90_times(&self, k: usize) -> Self {
        Self {
            grid: self.grid.rotate90_times(k),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            grid: self.grid.transpose(),
        }
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        Ok(Self {
            grid: self.grid.crop(row0, col0, height, width)?,
        })
    }

    /// Multiplies every amplitude by a positive factor.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::from_grid(self.grid.map(|v| v * factor))
    }
}

impl<T: Scalar> TryFrom<Grid<T>> for ImageGrid<T> {
    type Error = RarmaError;

    fn try_from(grid: Grid<T>) -> Result<Self> {
        Self::from_grid(grid)
    }
}

impl<T: Scalar> From<ImageGrid<T>> for Grid<T> {
    fn from(img: ImageGrid<T>) -> Self {
        img.grid
    }
}
