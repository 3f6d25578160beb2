//! Command-line flags. Every flag is optional at parse time so that a config
//! file can supply it; the documented defaults apply last.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rarma::detection::Roi;
use rarma::Link;

#[derive(Debug, Parser)]
#[command(name = "rarma", version, about = "Simulate, fit and scan 2-D Rayleigh ARMA fields")]
pub struct Cli {
    /// TOML file supplying values for any flag (flags take precedence).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a field and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model and report estimates, intervals and tests as JSON.
    Fit(FitArgs),
    /// Four-rotation control-chart anomaly detection.
    Detect(DetectArgs),
    /// Monte Carlo study of the estimator.
    Montecarlo(MonteCarloArgs),
    /// Fit, then write quantile residuals and an exceedance summary.
    Residuals(ResidualArgs),
}

pub fn parse_order(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts[..] {
        [p, q] => Ok((
            p.parse().map_err(|e| format!("bad p {p:?}: {e}"))?,
            q.parse().map_err(|e| format!("bad q {q:?}: {e}"))?,
        )),
        _ => Err(format!("expected p,q, got {s:?}")),
    }
}

/// `x,y,h,w`: column offset, row offset, height, width.
pub fn parse_roi(s: &str) -> Result<Roi, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad ROI value {t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, h, w] => Ok(Roi::new(y, x, h, w)),
        _ => Err(format!("expected x,y,h,w, got {s:?}")),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Model order p,q [default: 1,0]
    #[arg(long, value_parser = parse_order)]
    pub order: Option<(usize, usize)>,
    /// Link function [default: log]
    #[arg(long)]
    pub link: Option<Link>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Intercept [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// AR coefficients, row-major over lags (0,1)..(p,p)
    #[arg(long, num_args = 1, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Option<Vec<f64>>,
    /// MA coefficients, row-major over lags (0,1)..(q,q)
    #[arg(long, num_args = 1, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Rows [default: 80]
    #[arg(long)]
    pub rows: Option<usize>,
    /// Columns [default: 80]
    #[arg(long)]
    pub cols: Option<usize>,
    /// RNG seed [default: 2024]
    #[arg(long)]
    pub seed: Option<u64>,
    /// RNG stream within the seed [default: 0]
    #[arg(long)]
    pub stream: Option<u64>,
    /// Extra rows and columns simulated then discarded [default: 0]
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Output CSV path
    #[arg(long, short)]
    pub output: PathBuf,
    /// Optional 8-bit PGM preview
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input matrix (CSV or PGM)
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Confidence intervals have level 1 - alpha [default: 0.05]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Size of the overall Wald test [default: 0.05]
    #[arg(long)]
    pub pfa: Option<f64>,
    /// BFGS iteration cap [default: 500]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// JSON report path [default: stdout]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// CSV of fitted means on the interior cells
    #[arg(long)]
    pub fitted: Option<PathBuf>,
    /// CSV of quantile residuals on the interior cells
    #[arg(long)]
    pub residuals: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ResidualArgs {
    /// Input matrix (CSV or PGM)
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Control limit L [default: 3]
    #[arg(long)]
    pub limit: Option<f64>,
    /// BFGS iteration cap [default: 500]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// CSV of quantile residuals on the interior cells
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Input matrix (CSV or PGM)
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Training region x,y,h,w (x = column, y = row) [default: whole image]
    #[arg(long, value_parser = parse_roi)]
    pub roi: Option<Roi>,
    /// Control limit L [default: 3]
    #[arg(long)]
    pub limit: Option<f64>,
    /// Morphology: default, urban, none, or a list like open:3,dilate:7 [default: default]
    #[arg(long)]
    pub morph: Option<String>,
    /// Size of the per-rotation Wald test [default: 0.05]
    #[arg(long)]
    pub pfa: Option<f64>,
    /// BFGS iteration cap [default: 500]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Detection mask (bilevel PGM)
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Per-rotation parameter table (JSON)
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Fit quality (JSON)
    #[arg(long)]
    pub quality: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    /// rarma10, rarma11 or custom (custom reads --order/--beta/--phi/--theta) [default: rarma10]
    #[arg(long)]
    pub scenario: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Square sizes N = M [default: 20,40,80]
    #[arg(long, num_args = 1, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Replications per size [default: 1000]
    #[arg(long)]
    pub reps: Option<usize>,
    /// RNG seed [default: 2024]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra rows and columns simulated then discarded [default: 0]
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Coverage uses intervals of level 1 - alpha [default: 0.05]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Summary CSV path [default: stdout]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Full summary as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
}
