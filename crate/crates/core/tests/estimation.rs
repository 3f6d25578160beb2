use rarma::simulation::scenarios;
use rarma::*;

fn swap_lags(g: &Params64) -> Params64 {
    let swap = |v: &[f64]| {
        if v.is_empty() {
            vec![]
        } else {
            vec![v[1], v[0], v[2]]
        }
    };
    Params64 {
        beta: g.beta,
        phi: swap(&g.phi),
        theta: swap(&g.theta),
    }
}

#[test]
fn transposed_field_swaps_row_and_column_lags() {
    let (spec, g) = scenarios::rarma11();
    let y = simulate_field::<f64, _>(&spec, &g, 40, 40, &mut stream_rng(5, 0)).unwrap();
    let yt = y.transpose();

    let l = conditional_loglik(&y, &spec, &g).unwrap();
    let lt = conditional_loglik(&yt, &spec, &swap_lags(&g)).unwrap();
    assert!((l - lt).abs() <= 1e-9 * l.abs(), "{l} vs {lt}");

    let opts = FitOptions::default();
    let a = fit_cmle(&y, &spec, &opts).unwrap();
    let b = fit_cmle(&yt, &spec, &opts).unwrap();
    assert!(a.converged && b.converged);
    let expected = swap_lags(&a.gamma_hat).to_flat();
    for (x, e) in b.gamma_hat.to_flat().iter().zip(&expected) {
        assert!((x - e).abs() < 1e-4, "{x} vs {e}");
    }
}

#[test]
fn score_is_unbiased_at_the_truth() {
    for (spec, g) in [scenarios::rarma10(), scenarios::rarma11()] {
        let reps = 200;
        let k = spec.n_params();
        let mut sum = vec![0.0; k];
        let mut sum_sq = vec![0.0; k];
        for rep in 0..reps {
            let y = simulate_field::<f64, _>(&spec, &g, 30, 30, &mut stream_rng(17, rep)).unwrap();
            for (i, u) in score(&y, &spec, &g).unwrap().into_iter().enumerate() {
                sum[i] += u;
                sum_sq[i] += u * u;
            }
        }
        let n = reps as f64;
        for i in 0..k {
            let mean = sum[i] / n;
            let sd = (sum_sq[i] / n - mean * mean).sqrt();
            assert!(mean.abs() < 4.0 * sd / n.sqrt(), "component {i}: mean {mean}, sd {sd}");
        }
    }
}

#[test]
fn score_vanishes_at_the_estimate() {
    let (spec, g) = scenarios::rarma10();
    let y = simulate_field::<f64, _>(&spec, &g, 50, 50, &mut stream_rng(2, 9)).unwrap();
    let fit = fit_cmle(&y, &spec, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let n = fit.n_obs as f64;
    for u in score(&y, &spec, &fit.gamma_hat).unwrap() {
        assert!(u.abs() / n < 1e-6, "{u}");
    }
}

#[test]
fn single_precision_fit_tracks_double() {
    let (spec, g) = scenarios::rarma10();
    let y = simulate_field::<f64, _>(&spec, &g, 60, 60, &mut stream_rng(3, 1)).unwrap();
    let y32 = Image32::new(60, 60, y.as_slice().iter().map(|&v| v as f32).collect()).unwrap();
    let f64_fit = fit_cmle(&y, &spec, &FitOptions::default()).unwrap();
    let opts32 = FitOptions::<f32> {
        grad_tol: 1e-4,
        ..FitOptions::default()
    };
    let f32_fit = fit_cmle(&y32, &spec, &opts32).unwrap();
    for (a, b) in f64_fit.gamma_hat.to_flat().iter().zip(f32_fit.gamma_hat.to_flat()) {
        assert!((a - b as f64).abs() < 2e-3, "{a} vs {b}");
    }
}
