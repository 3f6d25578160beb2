//! Normal and chi-square distribution kernels used by inference and residuals.
//!
//! The complementary error function comes from `libm` and the regularized
//! incomplete gamma from `statrs`;
//! the quantile functions are computed here.

use libm::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{domain, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile `Phi^-1(u)` for `u` in `(0, 1)`.
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("normal quantile needs u in (0, 1), got {u}"));
    }
    Ok(normal_quantile_unchecked(u))
}

pub(crate) fn normal_quantile_unchecked(u: f64) -> f64 {
    let x = ppnd16(u);
    // one Halley step against the erfc-based CDF
    let tail_err = if u < 0.5 {
        std_normal_cdf(x) - u
    } else {
        (1.0 - u) - 0.5 * erfc(x / SQRT_2)
    };
    let corr = tail_err / std_normal_pdf(x);
    let step = corr / (1.0 + 0.5 * x * corr);
    if step.is_finite() {
        x - step
    } else {
        x
    }
}

// Wichura's AS 241 (PPND16), about 1e-16 relative accuracy.
fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Chi-square CDF with `nu` degrees of freedom.
pub fn chi2_cdf(x: f64, nu: usize) -> Result<f64> {
    check_nu(nu)?;
    if x.is_nan() {
        return domain("chi-square CDF of NaN");
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_lr(nu as f64 / 2.0, x / 2.0))
}

/// Upper tail `1 - F(x)` of the chi-square distribution, used for p-values.
pub fn chi2_sf(x: f64, nu: usize) -> Result<f64> {
    check_nu(nu)?;
    if x.is_nan() {
        return domain("chi-square survival of NaN");
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(nu as f64 / 2.0, x / 2.0))
}

fn chi2_pdf(x: f64, nu: usize) -> f64 {
    let k = nu as f64 / 2.0;
    if x <= 0.0 {
        return 0.0;
    }
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Chi-square quantile: the `x` with `P(X <= x) = prob` for `X ~ chi2(nu)`.
pub fn chi2_quantile(prob: f64, nu: usize) -> Result<f64> {
    check_nu(nu)?;
    if !(prob > 0.0 && prob < 1.0) {
        return domain(format!("chi-square quantile needs prob in (0, 1), got {prob}"));
    }
    let k = nu as f64;

    // Wilson-Hilferty start, with the small-x series for the far lower tail.
    let z = normal_quantile_unchecked(prob);
    let h = 2.0 / (9.0 * k);
    let mut x = k * (1.0 - h + z * h.sqrt()).powi(3);
    let series = (prob * (k / 2.0) * (ln_gamma(k / 2.0)).exp() * 2f64.powf(k / 2.0)).powf(2.0 / k);
    if !(x > 0.0) || x < series {
        x = series;
    }
    if !(x.is_finite() && x > 0.0) {
        x = k;
    }

    // Bracket, then safeguarded Newton.
    let f = |x: f64| -> f64 {
        if prob < 0.5 {
            gamma_lr(k / 2.0, x / 2.0) - prob
        } else {
            (1.0 - prob) - gamma_ur(k / 2.0, x / 2.0)
        }
    };
    let (mut lo, mut hi) = (0.0f64, x.max(1.0));
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = chi2_pdf(x, nu);
        let mut next = x - fx / d;
        if !(next.is_finite() && next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn check_nu(nu: usize) -> Result<()> {
    if nu == 0 {
        return domain("chi-square degrees of freedom must be >= 1");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Reference values from an independent arbitrary-precision evaluation.
    #[test]
    fn normal_cdf_reference() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(3.0) - 0.998_650_101_968_369_9).abs() <= 1e-12);
        assert!((2.0 * std_normal_cdf(3.0) - 1.0 - 0.9973).abs() < 1e-4);
        assert!((std_normal_cdf(-5.0) - 2.866_515_718_791_939e-7).abs() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-8.0..8.0);
            assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn normal_quantile_reference() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() <= 1e-12);
        assert!((std_normal_quantile(1e-12).unwrap() + 7.034_483_825_301_131).abs() <= 1e-9);
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn normal_round_trip_and_monotone() {
        let n = 1000;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..n {
            let u = 1e-12 + (1.0 - 2e-12) * i as f64 / (n - 1) as f64;
            let x = std_normal_quantile(u).unwrap();
            assert!(x > prev);
            prev = x;
            assert!((std_normal_cdf(x) - u).abs() <= 1e-9, "u={u}");
        }
    }

    #[test]
    fn chi2_quantile_reference() {
        let z = std_normal_quantile(0.975).unwrap();
        assert_relative_eq!(chi2_quantile(0.95, 1).unwrap(), z * z, max_relative = 1e-8);
        assert_relative_eq!(chi2_quantile(0.95, 1).unwrap(), 3.841_458_820_694_124, max_relative = 1e-8);
        assert_relative_eq!(chi2_quantile(0.5, 2).unwrap(), 2.0 * 2f64.ln(), max_relative = 1e-8);
        assert_relative_eq!(chi2_quantile(0.95, 7).unwrap(), 14.067_140_449_340_169, max_relative = 1e-8);
        assert!(chi2_quantile(0.0, 3).is_err());
        assert!(chi2_quantile(0.5, 0).is_err());
    }

    #[test]
    fn chi2_round_trip_and_monotone() {
        for nu in [1, 2, 3, 7, 30, 150] {
            let mut prev = 0.0;
            for i in 1..400 {
                let p = i as f64 / 400.0;
                let x = chi2_quantile(p, nu).unwrap();
                assert!(x > prev, "nu={nu} p={p}");
                prev = x;
                assert!((chi2_cdf(x, nu).unwrap() - p).abs() <= 1e-7, "nu={nu} p={p}");
            }
            for &p in &[1e-10, 1e-6, 1.0 - 1e-6, 1.0 - 1e-10] {
                let x = chi2_quantile(p, nu).unwrap();
                assert!((chi2_cdf(x, nu).unwrap() - p).abs() <= 1e-7 * p.max(1e-3), "nu={nu} p={p}");
            }
        }
    }

    #[test]
    fn chi2_sf_complements_cdf() {
        for nu in [1, 4, 9] {
            for &x in &[0.1, 1.0, 5.0, 20.0] {
                let s = chi2_sf(x, nu).unwrap() + chi2_cdf(x, nu).unwrap();
                assert!((s - 1.0).abs() < 1e-13);
            }
        }
        assert_eq!(chi2_sf(0.0, 3).unwrap(), 1.0);
    }
}
