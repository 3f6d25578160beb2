//! Two-dimensional Rayleigh ARMA (RARMA) random fields.
//!
//! The conditional mean of each pixel follows a log-linked ARMA recursion on
//! its north-west neighbours. The crate simulates such fields, fits them by
//! conditional maximum likelihood with analytic derivatives, provides Wald
//! inference from the expected information, and flags anomalous pixels with
//! a four-rotation control chart on quantile residuals.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the usual double-precision instantiation.

pub mod detection;
pub mod error;
pub mod estimation;
pub mod grid;
pub mod inference;
pub mod latent;
pub mod link;
pub mod linalg;
pub mod model;
pub mod rayleigh;
pub mod scalar;
pub mod simulation;
pub mod specfun;

pub use detection::{
    connected_components, detect_anomalies, fit_quality, morphology, quantile_residuals, threshold_mask,
    BinaryMask, DetectOptions, DetectionReport, FitQuality, MorphOp, MorphPipeline, ResidualGrid, Roi,
};
pub use error::{RarmaError, Result};
pub use estimation::{
    conditional_loglik, eta_gradients, fit_cmle, initial_values, score, EtaGradientState, FitOptions,
    FitResult,
};
pub use grid::{Grid, ImageGrid};
pub use inference::{
    confidence_intervals, fisher_info, information_criteria, overall_significance, wald_test,
    ConfidenceIntervals, FisherMatrix, InformationCriteria, WaldReport,
};
pub use latent::{fitted_image, recurse_latents, LatentGrids};
pub use link::Link;
pub use model::{ModelSpec, ParamVector};
pub use rayleigh::{mean_variance, rayleigh_cdf, rayleigh_median, rayleigh_pdf, rayleigh_quantile};
pub use scalar::Scalar;
pub use simulation::{run_monte_carlo, simulate_field, stream_rng, McSummary, Scenario};

pub type Image64 = ImageGrid<f64>;
pub type Image32 = ImageGrid<f32>;
pub type Params64 = ParamVector<f64>;
pub type Latents64 = LatentGrids<f64>;
pub type Fit64 = FitResult<f64>;
