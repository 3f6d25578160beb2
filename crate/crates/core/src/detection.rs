//! Quantile residuals, control-chart masks, binary morphology and the
//! four-rotation anomaly detector.
//!
//! The detector fits one model order on a region of interest in each of the
//! four quarter-turn orientations, predicts the whole image one step ahead
//! in each orientation, flags cells whose quantile residual leaves `[-L, L]`,
//! maps the four masks back to the input frame, takes their union and
//! cleans it with a morphology pipeline.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, RarmaError, Result};
use crate::estimation::{fit_cmle, FitOptions, FitResult};
use crate::grid::{Grid, ImageGrid};
use crate::latent::{recurse_latents, LatentGrids};
use crate::model::ModelSpec;
use crate::rayleigh::{cdf_unchecked, survival_unchecked};
use crate::scalar::Scalar;
use crate::specfun::normal_quantile_unchecked;

/// Default control limit.
pub const DEFAULT_LIMIT: f64 = 3.0;

/// CDF values are kept inside `[CDF_CLAMP, 1 - CDF_CLAMP]` before inversion.
pub const CDF_CLAMP: f64 = 1e-15;

/// Quantile residuals; NaN marks cells without a prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ResidualGrid<T> {
    pub values: Grid<T>,
    /// Number of cells whose CDF value hit the clamp.
    pub clamped: usize,
}

impl<T: Scalar> ResidualGrid<T> {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> Option<T> {
        let v = self.values.get(r, c);
        (!v.is_nan()).then_some(v)
    }

    /// Defined residuals in row-major order.
    pub fn defined(&self) -> impl Iterator<Item = T> + '_ {
        self.values.as_slice().iter().copied().filter(|v| !v.is_nan())
    }

    /// Count of defined residuals with `|r| >= limit`.
    pub fn exceedances(&self, limit: f64) -> usize {
        self.defined().filter(|v| v.as_f64().abs() >= limit).count()
    }
}

/// `Phi^-1(F(y; mu))` with the upper tail taken from the survival function.
/// Returns the residual and whether the probability was clamped.
fn normal_score(y: f64, mu: f64) -> (f64, bool) {
    let lower = cdf_unchecked(y, mu);
    if lower <= 0.5 {
        let u = lower.max(CDF_CLAMP);
        (normal_quantile_unchecked(u), lower < CDF_CLAMP)
    } else {
        let upper = survival_unchecked(y, mu);
        let u = upper.max(CDF_CLAMP);
        (-normal_quantile_unchecked(u), upper < CDF_CLAMP)
    }
}

/// Quantile residuals of `y` under the conditional means in `latents`.
///
/// Border cells and cells with a non-finite mean stay undefined.
pub fn quantile_residuals<T: Scalar>(
    y: &ImageGrid<T>,
    latents: &LatentGrids<T>,
) -> Result<ResidualGrid<T>> {
    if y.grid().dims() != latents.mu.dims() {
        return Err(RarmaError::Dimension(format!(
            "image is {}x{}, latents are {}x{}",
            y.rows(),
            y.cols(),
            latents.rows(),
            latents.cols()
        )));
    }
    let mut clamped = 0;
    let values = Grid::from_fn(y.rows(), y.cols(), |r, c| {
        let mu = latents.mu.get(r, c);
        if !latents.is_interior(r, c) || !(mu.is_finite() && mu > T::zero()) {
            return T::nan();
        }
        let (z, hit) = normal_score(y.get(r, c).as_f64(), mu.as_f64());
        clamped += usize::from(hit);
        T::lit(z)
    });
    Ok(ResidualGrid { values, clamped })
}

/// Where a mask came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Control chart of the `k`-th quarter-turn orientation.
    Rotation(u8),
    Union,
    Morphology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMask {
    bits: Grid<bool>,
    pub provenance: Provenance,
}

impl BinaryMask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>, provenance: Provenance) -> Result<Self> {
        Ok(Self {
            bits: Grid::new(rows, cols, bits)?,
            provenance,
        })
    }

    pub fn empty(rows: usize, cols: usize, provenance: Provenance) -> Self {
        Self {
            bits: Grid::filled(rows, cols, false),
            provenance,
        }
    }

    pub fn from_grid(bits: Grid<bool>, provenance: Provenance) -> Self {
        Self { bits, provenance }
    }

    pub fn rows(&self) -> usize {
        self.bits.rows()
    }

    pub fn cols(&self) -> usize {
        self.bits.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits.get(r, c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.bits.set(r, c, value);
    }

    pub fn grid(&self) -> &Grid<bool> {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.as_slice().iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Counterclockwise quarter turns.
    pub fn rotate90_times(&self, k: usize) -> Self {
        Self {
            bits: self.bits.rotate90_times(k),
            provenance: self.provenance,
        }
    }

    /// Undoes `rotate90_times(k)`.
    pub fn realign(&self, k: usize) -> Self {
        self.rotate90_times((4 - k % 4) % 4)
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.map(|b| !b),
            provenance: self.provenance,
        }
    }

    /// Cell-wise OR.
    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a || b)
    }

    /// Cell-wise AND.
    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a && b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.bits.dims() == other.bits.dims()
            && self
                .bits
                .as_slice()
                .iter()
                .zip(other.bits.as_slice())
                .all(|(&a, &b)| !a || b)
    }

    fn zip(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        if self.bits.dims() != other.bits.dims() {
            return Err(RarmaError::Dimension(format!(
                "masks are {:?} and {:?}",
                self.bits.dims(),
                other.bits.dims()
            )));
        }
        let bits = self
            .bits
            .as_slice()
            .iter()
            .zip(other.bits.as_slice())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            bits: Grid::new(self.rows(), self.cols(), bits)?,
            provenance: Provenance::Union,
        })
    }
}

/// Sets the cells with `|r| >= limit`; undefined cells stay clear.
pub fn threshold_mask<T: Scalar>(residuals: &ResidualGrid<T>, limit: f64) -> Result<BinaryMask> {
    if !(limit > 0.0) {
        return domain(format!("control limit must be > 0, got {limit}"));
    }
    let bits = residuals
        .values
        .map(|v| !v.is_nan() && v.as_f64().abs() >= limit);
    Ok(BinaryMask::from_grid(bits, Provenance::Rotation(0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphKind {
    Erode,
    Dilate,
    Open,
    Close,
}

impl fmt::Display for MorphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MorphKind::Erode => "erode",
            MorphKind::Dilate => "dilate",
            MorphKind::Open => "open",
            MorphKind::Close => "close",
        })
    }
}

/// Morphological operation with an all-ones `size x size` element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphOp {
    pub kind: MorphKind,
    pub size: usize,
}

impl MorphOp {
    /// Rejects even sizes, which have no centre cell.
    pub fn new(kind: MorphKind, size: usize) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return domain(format!("structuring element must have odd size, got {size}"));
        }
        Ok(Self { kind, size })
    }

    pub fn erode(size: usize) -> Result<Self> {
        Self::new(MorphKind::Erode, size)
    }

    pub fn dilate(size: usize) -> Result<Self> {
        Self::new(MorphKind::Dilate, size)
    }

    pub fn open(size: usize) -> Result<Self> {
        Self::new(MorphKind::Open, size)
    }

    pub fn close(size: usize) -> Result<Self> {
        Self::new(MorphKind::Close, size)
    }
}

impl fmt::Display for MorphOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.size)
    }
}

impl FromStr for MorphOp {
    type Err = RarmaError;

    /// `kind:size`, e.g. `open:3`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| RarmaError::Domain(format!("expected kind:size, got {s:?}")))?;
        let kind = match kind.trim().to_ascii_lowercase().as_str() {
            "erode" => MorphKind::Erode,
            "dilate" => MorphKind::Dilate,
            "open" => MorphKind::Open,
            "close" => MorphKind::Close,
            other => return domain(format!("unknown morphology operation {other:?}")),
        };
        let size = size
            .trim()
            .parse::<usize>()
            .map_err(|e| RarmaError::Domain(format!("bad element size {size:?}: {e}")))?;
        Self::new(kind, size)
    }
}

/// Sliding-window pass along rows (`along_rows`) or columns. A window keeps
/// the cell set when it holds at least `need` set cells; cells outside the
/// frame count as background.
fn window_pass(bits: &Grid<bool>, size: usize, along_rows: bool, need: usize) -> Grid<bool> {
    let (rows, cols) = bits.dims();
    let half = size / 2;
    let mut out = Grid::filled(rows, cols, false);
    let (lines, len) = if along_rows { (rows, cols) } else { (cols, rows) };
    let at = |line: usize, i: usize| if along_rows { (line, i) } else { (i, line) };
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            let (r, c) = at(line, i);
            prefix[i + 1] = prefix[i] + usize::from(bits.get(r, c));
        }
        for i in 0..len {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(len);
            if prefix[hi] - prefix[lo] >= need {
                let (r, c) = at(line, i);
                out.set(r, c, true);
            }
        }
    }
    out
}

// Square elements are separable: a row pass followed by a column pass.
fn dilate_bits(bits: &Grid<bool>, size: usize) -> Grid<bool> {
    window_pass(&window_pass(bits, size, true, 1), size, false, 1)
}

fn erode_bits(bits: &Grid<bool>, size: usize) -> Grid<bool> {
    window_pass(&window_pass(bits, size, true, size), size, false, size)
}

/// Binary morphology; out-of-frame cells are background.
pub fn morphology(mask: &BinaryMask, op: MorphOp) -> BinaryMask {
    let s = op.size;
    let bits = match op.kind {
        MorphKind::Erode => erode_bits(&mask.bits, s),
        MorphKind::Dilate => dilate_bits(&mask.bits, s),
        MorphKind::Open => dilate_bits(&erode_bits(&mask.bits, s), s),
        MorphKind::Close => erode_bits(&dilate_bits(&mask.bits, s), s),
    };
    BinaryMask::from_grid(bits, Provenance::Morphology)
}

/// Ordered list of morphology operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphPipeline(pub Vec<MorphOp>);

impl MorphPipeline {
    /// No post-processing.
    pub fn none() -> Self {
        Self(Vec::new())
    }

    /// Opening with 3x3, then dilation with 7x7.
    pub fn standard() -> Self {
        Self(vec![
            MorphOp { kind: MorphKind::Open, size: 3 },
            MorphOp { kind: MorphKind::Dilate, size: 7 },
        ])
    }

    /// Closing then opening with 11x11, for dense urban scenes.
    pub fn urban() -> Self {
        Self(vec![
            MorphOp { kind: MorphKind::Close, size: 11 },
            MorphOp { kind: MorphKind::Open, size: 11 },
        ])
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Runs every step; an empty pipeline returns the mask unchanged.
    pub fn apply(&self, mask: &BinaryMask) -> BinaryMask {
        self.0
            .iter()
            .fold(mask.clone(), |m, &op| morphology(&m, op))
    }
}

impl Default for MorphPipeline {
    fn default() -> Self {
        Self::standard()
    }
}

impl fmt::Display for MorphPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self.0.iter().map(|op| op.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for MorphPipeline {
    type Err = RarmaError;

    /// A preset (`default`, `urban`, `none`) or a comma list such as `open:3,dilate:7`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "default" | "standard" => Ok(Self::standard()),
            "urban" => Ok(Self::urban()),
            "none" | "" => Ok(Self::none()),
            list => list
                .split(',')
                .map(MorphOp::from_str)
                .collect::<Result<Vec<_>>>()
                .map(Self),
        }
    }
}

/// 8-connected group of set cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    /// `(row, col)` cells in discovery order.
    pub cells: Vec<(usize, usize)>,
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl Component {
    pub fn size(&self) -> usize {
        self.cells.len()
    }

    /// Whether any cell falls inside the rectangle.
    pub fn overlaps(&self, roi: &Roi) -> bool {
        self.cells.iter().any(|&(r, c)| roi.contains(r, c))
    }
}

/// 8-connected components in row-major order of their first cell.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (rows, cols) = mask.bits.dims();
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        if seen[start] || !mask.bits.as_slice()[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (r0, c0) = (start / cols, start % cols);
        let mut comp = Component {
            cells: Vec::new(),
            min_row: r0,
            min_col: c0,
            max_row: r0,
            max_col: c0,
        };
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / cols, idx % cols);
            comp.cells.push((r, c));
            comp.min_row = comp.min_row.min(r);
            comp.max_row = comp.max_row.max(r);
            comp.min_col = comp.min_col.min(c);
            comp.max_col = comp.max_col.max(c);
            for nr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    let n = nr * cols + nc;
                    if !seen[n] && mask.bits.as_slice()[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Goodness of fit between observations and fitted means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitQuality {
    pub mse: f64,
    pub mape: f64,
    /// Cells that entered the averages.
    pub cells: usize,
}

/// MSE and MAPE over the cells where `mu_hat` is a valid mean.
pub fn fit_quality<T: Scalar>(y: &ImageGrid<T>, mu_hat: &Grid<T>) -> Result<FitQuality> {
    if y.grid().dims() != mu_hat.dims() {
        return Err(RarmaError::Dimension(format!(
            "image is {:?}, fitted means are {:?}",
            y.grid().dims(),
            mu_hat.dims()
        )));
    }
    let (mut se, mut ape, mut n) = (0.0, 0.0, 0usize);
    for (&yv, &mv) in y.as_slice().iter().zip(mu_hat.as_slice()) {
        let (yv, mv) = (yv.as_f64(), mv.as_f64());
        if !(mv.is_finite() && mv > 0.0) {
            continue;
        }
        se += (yv - mv) * (yv - mv);
        ape += (yv - mv).abs() / yv;
        n += 1;
    }
    if n == 0 {
        return domain("no fitted cells to compare");
    }
    let nf = n as f64;
    Ok(FitQuality {
        mse: se / nf,
        mape: ape / nf,
        cells: n,
    })
}

/// Axis-aligned rectangle: top-left `(row, col)` and extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Roi {
    pub fn new(row: usize, col: usize, height: usize, width: usize) -> Self {
        Self { row, col, height, width }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::new(0, 0, rows, cols)
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.row && r < self.row + self.height && c >= self.col && c < self.col + self.width
    }

    pub fn check(&self, rows: usize, cols: usize) -> Result<()> {
        if self.height == 0
            || self.width == 0
            || self.row + self.height > rows
            || self.col + self.width > cols
        {
            return Err(RarmaError::Dimension(format!(
                "ROI {}x{} at ({}, {}) does not fit a {rows}x{cols} image",
                self.height, self.width, self.row, self.col
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DetectOptions<T> {
    pub limit: f64,
    pub pipeline: MorphPipeline,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> Default for DetectOptions<T> {
    fn default() -> Self {
        Self {
            limit: DEFAULT_LIMIT,
            pipeline: MorphPipeline::standard(),
            fit: FitOptions::default(),
        }
    }
}

/// One orientation of the detector.
#[derive(Debug, Clone)]
pub struct RotationReport<T> {
    /// Counterclockwise quarter turns applied to the input.
    pub k: usize,
    /// Fit on the rotated ROI; `None` when fitting raised an error.
    pub fit: Option<FitResult<T>>,
    pub error: Option<String>,
    /// One-step-ahead residuals over the rotated input.
    pub residuals: Option<ResidualGrid<T>>,
    /// Control-chart mask in the input frame; empty when the rotation is unused.
    pub mask: BinaryMask,
    /// Fit quality of the one-step-ahead means over the rotated input.
    pub quality: Option<FitQuality>,
    /// Whether the mask entered the union (requires a converged fit).
    pub used: bool,
}

#[derive(Debug, Clone)]
pub struct DetectionReport<T> {
    /// Union after the morphology pipeline.
    pub mask: BinaryMask,
    /// Union before post-processing.
    pub union: BinaryMask,
    pub per_rotation: Vec<RotationReport<T>>,
    /// Quality of the unrotated orientation, if it was usable.
    pub quality: Option<FitQuality>,
    /// Rotations left out of the union.
    pub degraded: Vec<usize>,
    pub limit: f64,
    pub pipeline: MorphPipeline,
}

impl<T> DetectionReport<T> {
    pub fn components(&self) -> Vec<Component> {
        connected_components(&self.mask)
    }

    pub fn is_degraded(&self) -> bool {
        !self.degraded.is_empty()
    }
}

fn run_rotation<T: Scalar>(
    input: &ImageGrid<T>,
    roi_image: &ImageGrid<T>,
    spec: &ModelSpec,
    opts: &DetectOptions<T>,
    k: usize,
) -> RotationReport<T> {
    let empty = BinaryMask::empty(input.rows(), input.cols(), Provenance::Rotation(k as u8));
    let fit = match fit_cmle(&roi_image.rotate90_times(k), spec, &opts.fit) {
        Ok(f) => f,
        Err(e) => {
            log::warn!("rotation {k}: fit failed: {e}");
            return RotationReport {
                k,
                fit: None,
                error: Some(e.to_string()),
                residuals: None,
                mask: empty,
                quality: None,
                used: false,
            };
        }
    };
    let rotated = input.rotate90_times(k);
    let outcome = recurse_latents(&rotated, spec, &fit.gamma_hat).and_then(|lat| {
        let res = quantile_residuals(&rotated, &lat)?;
        let mask = threshold_mask(&res, opts.limit)?
            .realign(k)
            .with_provenance(Provenance::Rotation(k as u8));
        let quality = fit_quality(&rotated, &lat.mu).ok();
        Ok((res, mask, quality))
    });
    match outcome {
        Ok((res, mask, quality)) => {
            let used = fit.converged;
            if !used {
                log::warn!("rotation {k}: fit did not converge ({:?})", fit.stop_reason);
            }
            RotationReport {
                k,
                fit: Some(fit),
                error: None,
                residuals: Some(res),
                mask: if used { mask } else { empty },
                quality,
                used,
            }
        }
        Err(e) => RotationReport {
            k,
            fit: Some(fit),
            error: Some(e.to_string()),
            residuals: None,
            mask: empty,
            quality: None,
            used: false,
        },
    }
}

/// Four-rotation control-chart detector.
///
/// The model is fitted on `roi` and on its three quarter-turn rotations. Each
/// fitted model predicts the correspondingly rotated input one step ahead,
/// with MA errors rebuilt on the full image. Cells with `|r| >= limit` are
/// flagged, the masks are turned back to the input frame, united and passed
/// through `opts.pipeline`. Rotations whose fit fails or does not converge
/// are left out and listed in `degraded`.
pub fn detect_anomalies<T: Scalar>(
    input: &ImageGrid<T>,
    roi: Roi,
    spec: &ModelSpec,
    opts: &DetectOptions<T>,
) -> Result<DetectionReport<T>> {
    roi.check(input.rows(), input.cols())?;
    spec.check_grid(roi.height, roi.width)?;
    spec.check_grid(roi.width, roi.height)?;
    if !(opts.limit > 0.0) {
        return domain(format!("control limit must be > 0, got {}", opts.limit));
    }
    let roi_image = input.crop(roi.row, roi.col, roi.height, roi.width)?;
    let per_rotation: Vec<RotationReport<T>> = (0..4usize)
        .into_par_iter()
        .map(|k| run_rotation(input, &roi_image, spec, opts, k))
        .collect();

    let mut union = BinaryMask::empty(input.rows(), input.cols(), Provenance::Union);
    for rot in per_rotation.iter().filter(|r| r.used) {
        union = union.union(&rot.mask)?;
    }
    let mask = if opts.pipeline.is_empty() {
        union.clone()
    } else {
        opts.pipeline.apply(&union)
    };
    let degraded = per_rotation.iter().filter(|r| !r.used).map(|r| r.k).collect();
    let quality = per_rotation
        .first()
        .filter(|r| r.used)
        .and_then(|r| r.quality);
    Ok(DetectionReport {
        mask,
        union,
        per_rotation,
        quality,
        degraded,
        limit: opts.limit,
        pipeline: opts.pipeline.clone(),
    })
}
