use std::io::Write;
use std::path::Path;

use rarma::detection::{DetectOptions, MorphPipeline, Roi};
use rarma::simulation::simulate_field_burned;
use rarma::specfun::std_normal_cdf;
use rarma::{
    confidence_intervals, detect_anomalies, fit_cmle, fitted_image, information_criteria,
    overall_significance, quantile_residuals, run_monte_carlo, stream_rng, Fit64, FitOptions,
    Grid, Image64, Link, ModelSpec, Params64, RarmaError, Scenario,
};
use serde_json::{json, Value};

use crate::args::{
    DetectArgs, FitArgs, ModelArgs, MonteCarloArgs, ParamArgs, ResidualArgs, SimulateArgs,
};
use crate::config::{pick, FileConfig};
use crate::error::{CliError, CliResult};
use crate::format::{amplitude_preview, encode_pgm, mask_to_pgm, read_image, to_csv, write_file};

pub const DEFAULT_ORDER: (usize, usize) = (1, 0);
pub const DEFAULT_SIZE: usize = 80;
pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_PFA: f64 = 0.05;
pub const DEFAULT_LIMIT: f64 = 3.0;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_SIZES: [usize; 3] = [20, 40, 80];

/// Shape and parameter problems are the caller's fault; the rest is data.
fn classify(e: RarmaError) -> CliError {
    match e {
        RarmaError::InsufficientData { .. } | RarmaError::ParamLength { .. } | RarmaError::Dimension(_) => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Model(other),
    }
}

fn resolve_spec(m: &ModelArgs, cfg: &FileConfig) -> CliResult<ModelSpec> {
    let (p, q) = pick(m.order, cfg.order.map(|[p, q]| (p, q)), DEFAULT_ORDER);
    let link = match (m.link, &cfg.link) {
        (Some(l), _) => l,
        (None, Some(s)) => s
            .parse::<Link>()
            .map_err(|e| CliError::usage(format!("config link: {e}")))?,
        (None, None) => Link::default(),
    };
    Ok(ModelSpec::new(p, q).with_link(link))
}

fn resolve_params(spec: &ModelSpec, a: &ParamArgs, cfg: &FileConfig) -> CliResult<Params64> {
    let beta = pick(a.beta, cfg.beta, 0.0);
    let phi = pick(a.phi.clone(), cfg.phi.clone(), Vec::new());
    let theta = pick(a.theta.clone(), cfg.theta.clone(), Vec::new());
    let g = Params64::new(spec, beta, phi, theta).map_err(|e| CliError::usage(format!("--beta/--phi/--theta: {e}")))?;
    Ok(g)
}

fn check_probability(flag: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::usage(format!("--{flag} must lie in (0, 1), got {v}")))
    }
}

fn fit_options(max_iter: usize) -> FitOptions<f64> {
    FitOptions {
        max_iter,
        ..FitOptions::default()
    }
}

fn emit_json(value: &Value, path: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize") + "\n";
    match path {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(format!("stdout: {e}"))),
    }
}

fn interior(grid: &Grid<f64>, w: usize) -> CliResult<Grid<f64>> {
    grid.crop(w, w, grid.rows() - w, grid.cols() - w).map_err(classify)
}

pub fn simulate(a: &SimulateArgs, cfg: &FileConfig) -> CliResult<()> {
    let spec = resolve_spec(&a.model, cfg)?;
    let gamma = resolve_params(&spec, &a.params, cfg)?;
    let rows = pick(a.rows, cfg.rows, DEFAULT_SIZE);
    let cols = pick(a.cols, cfg.cols, DEFAULT_SIZE);
    let seed = pick(a.seed, cfg.seed, DEFAULT_SEED);
    let stream = pick(a.stream, cfg.stream, 0);
    let burn_in = pick(a.burn_in, cfg.burn_in, 0);
    spec.check_grid(rows, cols).map_err(classify)?;

    let mut rng = stream_rng(seed, stream);
    let y = simulate_field_burned(&spec, &gamma, rows, cols, burn_in, &mut rng).map_err(classify)?;
    write_file(&a.output, to_csv(y.grid()))?;
    if let Some(p) = &a.pgm {
        write_file(p, encode_pgm(&amplitude_preview(&y)))?;
    }
    let mean = y.as_slice().iter().sum::<f64>() / (rows * cols) as f64;
    emit_json(
        &json!({
            "order": [spec.p, spec.q],
            "link": spec.link.name(),
            "beta": gamma.beta,
            "phi": gamma.phi,
            "theta": gamma.theta,
            "rows": rows,
            "cols": cols,
            "seed": seed,
            "stream": stream,
            "burn_in": burn_in,
            "sample_mean": mean,
            "output": a.output.display().to_string(),
        }),
        None,
    )
}

/// Estimates with standard errors and `1 - alpha` intervals; SEs are null
/// when the information matrix cannot be inverted.
fn parameter_table(fit: &Fit64, alpha: f64) -> Vec<Value> {
    let labels = fit.spec.labels();
    let est = fit.gamma_hat.to_flat();
    match confidence_intervals(fit, alpha) {
        Ok(ci) => ci
            .intervals
            .iter()
            .map(|iv| {
                json!({
                    "label": iv.label,
                    "estimate": iv.estimate,
                    "se": iv.se,
                    "ci_lower": iv.lower,
                    "ci_upper": iv.upper,
                })
            })
            .collect(),
        Err(e) => {
            log::warn!("standard errors unavailable: {e}");
            labels
                .iter()
                .zip(&est)
                .map(|(l, v)| json!({ "label": l, "estimate": v, "se": null, "ci_lower": null, "ci_upper": null }))
                .collect()
        }
    }
}

fn wald_json(fit: &Fit64, pfa: f64) -> Value {
    match overall_significance(fit, pfa) {
        None => Value::Null,
        Some(Ok(w)) => json!({
            "statistic": w.statistic,
            "df": w.df,
            "pfa": w.pfa,
            "threshold": w.threshold,
            "p_value": w.p_value,
            "reject": w.reject,
        }),
        Some(Err(e)) => json!({ "error": e.to_string() }),
    }
}

fn convergence_json(fit: &Fit64) -> Value {
    json!({
        "converged": fit.converged,
        "stop_reason": fit.stop_reason,
        "iterations": fit.iterations,
        "score_norm": fit.score_norm,
        "start": fit.start.to_flat(),
    })
}

pub fn fit_report(y: &Image64, fit: &Fit64, alpha: f64, pfa: f64) -> Value {
    let ic = information_criteria(fit);
    let mut report = json!({
        "order": [fit.spec.p, fit.spec.q],
        "link": fit.spec.link.name(),
        "rows": fit.rows,
        "cols": fit.cols,
        "n_obs": fit.n_obs,
        "confidence_level": 1.0 - alpha,
        "parameters": parameter_table(fit, alpha),
        "loglik": fit.loglik,
        "aic": ic.aic,
        "sic": ic.sic,
        "wald_overall": wald_json(fit, pfa),
        "convergence": convergence_json(fit),
    });
    if fit.spec.p == 0 && fit.spec.q == 0 {
        let n = y.as_slice().len() as f64;
        let ss: f64 = y.as_slice().iter().map(|v| v * v).sum();
        report["closed_form_mean"] = json!((std::f64::consts::PI * ss / (4.0 * n)).sqrt());
        report["fitted_mean"] = json!(fit.gamma_hat.beta.exp());
    }
    report
}

fn fit_input(input: &Path, spec: &ModelSpec, max_iter: usize) -> CliResult<(Image64, Fit64)> {
    let y = read_image(input)?;
    spec.check_grid(y.rows(), y.cols()).map_err(classify)?;
    let fit = fit_cmle(&y, spec, &fit_options(max_iter)).map_err(classify)?;
    if !fit.converged {
        log::warn!("fit did not converge: {:?}", fit.stop_reason);
    }
    Ok((y, fit))
}

pub fn fit(a: &FitArgs, cfg: &FileConfig) -> CliResult<()> {
    let spec = resolve_spec(&a.model, cfg)?;
    let alpha = check_probability("alpha", pick(a.alpha, cfg.alpha, DEFAULT_ALPHA))?;
    let pfa = check_probability("pfa", pick(a.pfa, cfg.pfa, DEFAULT_PFA))?;
    let max_iter = pick(a.max_iter, cfg.max_iter, DEFAULT_MAX_ITER);
    let (y, fit) = fit_input(&a.input, &spec, max_iter)?;
    if let Some(p) = &a.fitted {
        write_file(p, to_csv(fitted_image(&fit.latents).map_err(classify)?.grid()))?;
    }
    if let Some(p) = &a.residuals {
        let r = quantile_residuals(&y, &fit.latents).map_err(classify)?;
        write_file(p, to_csv(&interior(&r.values, spec.w())?))?;
    }
    emit_json(&fit_report(&y, &fit, alpha, pfa), a.output.as_deref())
}

pub fn residuals(a: &ResidualArgs, cfg: &FileConfig) -> CliResult<()> {
    let spec = resolve_spec(&a.model, cfg)?;
    let limit = pick(a.limit, cfg.limit, DEFAULT_LIMIT);
    if !(limit > 0.0) {
        return Err(CliError::usage(format!("--limit must be > 0, got {limit}")));
    }
    let max_iter = pick(a.max_iter, cfg.max_iter, DEFAULT_MAX_ITER);
    let (y, fit) = fit_input(&a.input, &spec, max_iter)?;
    let r = quantile_residuals(&y, &fit.latents).map_err(classify)?;
    if let Some(p) = &a.output {
        write_file(p, to_csv(&interior(&r.values, spec.w())?))?;
    }
    let v: Vec<f64> = r.defined().collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let variance = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let exceed = r.exceedances(limit);
    emit_json(
        &json!({
            "order": [spec.p, spec.q],
            "converged": fit.converged,
            "cells": v.len(),
            "limit": limit,
            "exceedances": exceed,
            "fraction": exceed as f64 / n,
            "expected_fraction": 2.0 * std_normal_cdf(-limit),
            "clamped": r.clamped,
            "mean": mean,
            "variance": variance,
        }),
        None,
    )
}

fn roi_json(roi: &Roi) -> Value {
    json!({ "x": roi.col, "y": roi.row, "height": roi.height, "width": roi.width })
}

pub fn detect(a: &DetectArgs, cfg: &FileConfig) -> CliResult<()> {
    let spec = resolve_spec(&a.model, cfg)?;
    let limit = pick(a.limit, cfg.limit, DEFAULT_LIMIT);
    if !(limit > 0.0) {
        return Err(CliError::usage(format!("--limit must be > 0, got {limit}")));
    }
    let pfa = check_probability("pfa", pick(a.pfa, cfg.pfa, DEFAULT_PFA))?;
    let morph = pick(a.morph.clone(), cfg.morph.clone(), "default".to_string());
    let pipeline: MorphPipeline = morph
        .parse()
        .map_err(|e| CliError::usage(format!("--morph: {e}")))?;
    let max_iter = pick(a.max_iter, cfg.max_iter, DEFAULT_MAX_ITER);

    let y = read_image(&a.input)?;
    let roi = a
        .roi
        .or(cfg.roi.map(|[x, yy, h, w]| Roi::new(yy, x, h, w)))
        .unwrap_or(Roi::full(y.rows(), y.cols()));
    roi.check(y.rows(), y.cols())
        .map_err(|e| CliError::usage(format!("--roi: {e}")))?;
    let opts = DetectOptions {
        limit,
        pipeline,
        fit: fit_options(max_iter),
    };
    let report = detect_anomalies(&y, roi, &spec, &opts).map_err(classify)?;

    if let Some(p) = &a.mask {
        write_file(p, encode_pgm(&mask_to_pgm(&report.mask)))?;
    }
    let rotations: Vec<Value> = report
        .per_rotation
        .iter()
        .map(|rot| {
            let mut entry = json!({
                "k": rot.k,
                "degrees": 90 * rot.k,
                "used": rot.used,
                "error": rot.error,
            });
            if let Some(fit) = &rot.fit {
                let table: Vec<Value> = parameter_table(fit, DEFAULT_ALPHA)
                    .into_iter()
                    .map(|p| json!({ "label": p["label"], "estimate": p["estimate"], "se": p["se"] }))
                    .collect();
                entry["parameters"] = json!(table);
                entry["wald_overall"] = wald_json(fit, pfa);
                entry["loglik"] = json!(fit.loglik);
                entry["convergence"] = convergence_json(fit);
            }
            entry
        })
        .collect();
    if let Some(p) = &a.params {
        emit_json(
            &json!({ "order": [spec.p, spec.q], "roi": roi_json(&roi), "rotations": rotations }),
            Some(p),
        )?;
    }
    let quality = json!({
        "mse": report.quality.map(|q| q.mse),
        "mape": report.quality.map(|q| q.mape),
        "cells": report.quality.map(|q| q.cells),
        "rotations": report.per_rotation.iter().map(|rot| json!({
            "k": rot.k,
            "mse": rot.quality.map(|q| q.mse),
            "mape": rot.quality.map(|q| q.mape),
        })).collect::<Vec<_>>(),
    });
    if let Some(p) = &a.quality {
        emit_json(&quality, Some(p))?;
    }
    let components: Vec<Value> = report
        .components()
        .iter()
        .map(|c| {
            json!({
                "row": c.min_row,
                "col": c.min_col,
                "height": c.max_row - c.min_row + 1,
                "width": c.max_col - c.min_col + 1,
                "pixels": c.size(),
            })
        })
        .collect();
    emit_json(
        &json!({
            "rows": y.rows(),
            "cols": y.cols(),
            "roi": roi_json(&roi),
            "limit": limit,
            "morph": report.pipeline.to_string(),
            "union_pixels": report.union.count(),
            "mask_pixels": report.mask.count(),
            "components": components,
            "degraded": report.degraded,
            "quality": quality,
        }),
        None,
    )
}

pub fn montecarlo(a: &MonteCarloArgs, cfg: &FileConfig) -> CliResult<()> {
    let name = pick(a.scenario.clone(), cfg.scenario.clone(), "rarma10".to_string());
    let scenario = match name.as_str() {
        "rarma10" => Scenario::rarma10(),
        "rarma11" => Scenario::rarma11(),
        "custom" => {
            let spec = resolve_spec(&a.model, cfg)?;
            let gamma = resolve_params(&spec, &a.params, cfg)?;
            Scenario::new("custom", spec, gamma).map_err(classify)?
        }
        other => {
            return Err(CliError::usage(format!(
                "--scenario must be rarma10, rarma11 or custom, got {other:?}"
            )))
        }
    };
    let sizes = pick(a.sizes.clone(), cfg.sizes.clone(), DEFAULT_SIZES.to_vec());
    let reps = pick(a.reps, cfg.reps, DEFAULT_REPS);
    if reps == 0 || sizes.is_empty() {
        return Err(CliError::usage("--reps and --sizes must be non-empty"));
    }
    for &s in &sizes {
        scenario.spec.check_grid(s, s).map_err(classify)?;
    }
    let mut scenario = scenario
        .with_sizes(&sizes)
        .with_replications(reps)
        .with_seed(pick(a.seed, cfg.seed, DEFAULT_SEED))
        .with_burn_in(pick(a.burn_in, cfg.burn_in, 0));
    scenario.alpha = check_probability("alpha", pick(a.alpha, cfg.alpha, DEFAULT_ALPHA))?;
    let summary = run_monte_carlo::<f64>(&scenario).map_err(classify)?;
    let csv = summary.to_csv();
    match &a.output {
        Some(p) => write_file(p, csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = &a.json {
        let value = serde_json::to_value(&summary).map_err(|e| CliError::io(e.to_string()))?;
        emit_json(&value, Some(p))?;
    }
    Ok(())
}
