use rand::Rng;
use rarma::detection::{MorphPipeline, Provenance};
use rarma::simulation::scenarios;
use rarma::*;

fn background(seed: u64, stream: u64, n: usize) -> Image64 {
    let (spec, g) = scenarios::rarma10();
    simulate_field(&spec, &g, n, n, &mut stream_rng(seed, stream)).unwrap()
}

/// Replaces a square block with Rayleigh draws at `factor` times the true conditional mean.
fn plant(y: &Image64, block: Roi, factor: f64, seed: u64) -> Image64 {
    let (spec, g) = scenarios::rarma10();
    let mu = recurse_latents(y, &spec, &g).unwrap().mu;
    let mut rng = stream_rng(seed, u64::MAX);
    let mut v = y.as_slice().to_vec();
    for r in block.row..block.row + block.height {
        for c in block.col..block.col + block.width {
            let u: f64 = rng.random_range(1e-12..1.0);
            v[r * y.cols() + c] = rayleigh_quantile(u, factor * mu.get(r, c)).unwrap();
        }
    }
    Image64::new(y.rows(), y.cols(), v).unwrap()
}

#[test]
fn homogeneous_field_leaves_few_components() {
    let spec = ModelSpec::new(1, 0);
    for stream in 0..3 {
        let y = background(41, stream, 80);
        let rep = detect_anomalies(&y, Roi::full(80, 80), &spec, &DetectOptions::default()).unwrap();
        assert!(!rep.is_degraded());
        assert!(rep.components().len() <= 2, "{} components", rep.components().len());
        assert_eq!(rep.mask.provenance, Provenance::Morphology);
    }
}

#[test]
fn planted_block_is_flagged_in_raw_union() {
    let spec = ModelSpec::new(1, 0);
    let block = Roi::new(50, 50, 5, 5);
    let opts = DetectOptions {
        pipeline: MorphPipeline::none(),
        ..DetectOptions::default()
    };
    for stream in 0..3 {
        let y = plant(&background(42, stream, 80), block, 3.0, stream);
        let rep = detect_anomalies(&y, Roi::new(0, 0, 40, 80), &spec, &opts).unwrap();
        assert_eq!(rep.mask, rep.union);
        assert!(rep.components().iter().any(|c| c.overlaps(&block)));
    }
}

#[test]
fn union_contains_every_rotation_mask() {
    let spec = ModelSpec::new(1, 0);
    let y = background(43, 0, 48);
    let rep = detect_anomalies(&y, Roi::new(4, 6, 30, 36), &spec, &DetectOptions::default()).unwrap();
    assert_eq!(rep.per_rotation.len(), 4);
    for (k, rot) in rep.per_rotation.iter().enumerate() {
        assert_eq!(rot.k, k);
        assert!(rot.used);
        assert_eq!(rot.mask.provenance, Provenance::Rotation(k as u8));
        assert_eq!((rot.mask.rows(), rot.mask.cols()), (48, 48));
        assert!(rot.mask.is_subset_of(&rep.union));
    }
    let q = rep.quality.unwrap();
    assert!(q.mse > 0.0 && q.mape > 0.0);
}

#[test]
fn unreachable_limit_gives_empty_mask() {
    let spec = ModelSpec::new(1, 0);
    let y = plant(&background(44, 0, 40), Roi::new(20, 20, 5, 5), 10.0, 1);
    let opts = DetectOptions {
        limit: 1e9,
        ..DetectOptions::default()
    };
    let rep = detect_anomalies(&y, Roi::full(40, 40), &spec, &opts).unwrap();
    assert!(rep.union.is_empty() && rep.mask.is_empty());
}

/// Square image with `rotate90(img) == img`.
fn rotation_symmetric(n: usize, seed: u64) -> Image64 {
    let base = Grid::from_fn(n, n, {
        let mut rng = stream_rng(seed, 0);
        move |_, _| rayleigh_quantile(rng.random_range(1e-12..1.0), 1.0).unwrap()
    });
    let canon = |r: usize, c: usize| {
        let mut best = (r, c);
        let mut cur = (r, c);
        for _ in 0..3 {
            cur = (cur.1, n - 1 - cur.0);
            best = best.min(cur);
        }
        best
    };
    let g = Grid::from_fn(n, n, |r, c| {
        let (a, b) = canon(r, c);
        base.get(a, b)
    });
    ImageGrid::from_grid(g).unwrap()
}

#[test]
fn symmetric_input_gives_rotated_copies() {
    let y = rotation_symmetric(36, 8);
    assert_eq!(y.rotate90_times(1), y);
    let spec = ModelSpec::new(1, 0);
    let opts = DetectOptions {
        limit: 2.0,
        pipeline: MorphPipeline::none(),
        ..DetectOptions::default()
    };
    let rep = detect_anomalies(&y, Roi::full(36, 36), &spec, &opts).unwrap();
    let first = &rep.per_rotation[0];
    assert!(!first.mask.is_empty());
    for rot in &rep.per_rotation[1..] {
        let (a, b) = (first.fit.as_ref().unwrap(), rot.fit.as_ref().unwrap());
        assert_eq!(a.gamma_hat, b.gamma_hat);
        // identical charts in the rotated frames, so the re-aligned masks are rotations of each other
        assert_eq!(rot.mask.grid(), first.mask.realign(rot.k).grid());
    }
}

#[test]
fn rarma_fit_beats_constant_mean() {
    let (spec, g) = scenarios::rarma10();
    let y = simulate_field::<f64, _>(&spec, &g, 80, 80, &mut stream_rng(45, 0)).unwrap();
    let fit = fit_cmle(&y, &spec, &FitOptions::default()).unwrap();
    let rarma = fit_quality(&y, fit.mu_hat()).unwrap();
    let flat = fit_cmle(&y, &ModelSpec::new(0, 0), &FitOptions::default()).unwrap();
    let level = flat.gamma_hat.beta.exp();
    let constant = Grid::from_fn(80, 80, |r, c| if r >= 1 && c >= 1 { level } else { f64::NAN });
    let baseline = fit_quality(&y, &constant).unwrap();
    assert_eq!(rarma.cells, baseline.cells);
    assert!(rarma.mse < baseline.mse, "{} vs {}", rarma.mse, baseline.mse);
}

#[test]
fn residuals_are_standard_normal_on_well_specified_fits() {
    let (spec, g) = scenarios::rarma10();
    for rep in 0..50 {
        let y = simulate_field::<f64, _>(&spec, &g, 100, 100, &mut stream_rng(46, rep)).unwrap();
        let fit = fit_cmle(&y, &spec, &FitOptions::default()).unwrap();
        let r = quantile_residuals(&y, &fit.latents).unwrap();
        let v: Vec<f64> = r.defined().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.05, "rep {rep}: mean {mean}");
        assert!((0.9..=1.1).contains(&var), "rep {rep}: var {var}");
    }
}
