//! Normal and gamma distribution helpers.
//!
//! The quantile function is Wichura's algorithm AS 241 (PPND16), a set of
//! three rational approximations with relative accuracy about 1e-16 over
//! (0, 1). The coefficient tables below are the published ones.

#![allow(clippy::excessive_precision)]

use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::{gamma_lr, ln_gamma};
use statrs::function::erf::erfc;

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

fn poly(coef: &[f64; 8], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Standard normal quantile. Returns `-inf`/`inf` at 0 and 1, NaN outside [0, 1].
pub fn normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile of the Gamma(shape, 1) distribution, polished by Newton steps
/// on the regularized incomplete gamma function.
pub fn gamma_quantile(shape: f64, p: f64) -> f64 {
    let mut x = Gamma::new(shape, 1.0)
        .expect("positive shape")
        .inverse_cdf(p);
    let log_norm = ln_gamma(shape);
    for _ in 0..50 {
        let density = ((shape - 1.0) * x.ln() - x - log_norm).exp();
        if density.is_nan() || density <= 0.0 {
            break;
        }
        let step = (gamma_lr(shape, x) - p) / density;
        let next = (x - step).max(x / 2.0);
        let done = (next - x).abs() <= 1e-15 * x;
        x = next;
        if done {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from a 30-digit evaluation of sqrt(2) * erfinv(2p - 1).
    const REFERENCE: [(f64, f64); 10] = [
        (0.005, -2.575_829_303_548_900_8),
        (0.07, -1.475_791_028_179_170_7),
        (0.0001, -3.719_016_485_455_680_6),
        (0.975, 1.959_963_984_540_054_2),
        (0.9, 1.281_551_565_544_600_5),
        (0.025, -1.959_963_984_540_054_2),
        (0.999, 3.090_232_306_167_813_5),
        (1e-10, -6.361_340_902_404_056),
        (0.3, -0.524_400_512_708_040_8),
        (0.6, 0.253_347_103_135_799_8),
    ];

    #[test]
    fn quantile_matches_reference() {
        for (p, z) in REFERENCE {
            assert!((normal_quantile(p) - z).abs() < 1e-12, "p={p}");
        }
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn quantile_edges() {
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(normal_quantile(1.0), f64::INFINITY);
        assert!(normal_quantile(1.5).is_nan());
    }

    #[test]
    fn cdf_inverts_quantile() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let back = normal_cdf(normal_quantile(p));
            assert!((back - p).abs() < 1e-9 * p, "p={p} back={back}");
        }
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn gamma_quantile_is_tight_for_large_shape() {
        let x = gamma_quantile(151.0, 0.975);
        assert!((x - 176.0171660970745).abs() < 1e-9 * x);
        assert!((gamma_lr(151.0, x) - 0.975).abs() < 1e-13);
        assert!((gamma_quantile(1.0, 0.975) - 3.688879454113936).abs() < 1e-12);
    }
}
