//! Predicted serum ID80 titers from antibody concentrations.
//!
//! A single antibody at concentration `c` against a virus with IC80 `ic80`
//! reaches 80% neutralization at dilution `c / ic80`. Cocktails are combined
//! either additively or by composing per-antibody Hill curves under Bliss
//! independence and solving for the dilution with 80% combined neutralization.

use crate::error::{Error, Result};

pub const TARGET_NEUTRALIZATION: f64 = 0.8;

/// Relative width at which the log-dilution bisection stops.
pub const BLISS_HILL_RTOL: f64 = 1e-12;

pub fn single_ab_titer(conc: f64, ic80: f64) -> f64 {
    conc / ic80
}

/// Sum of per-antibody titers.
pub fn combine_additivity(titers: &[f64]) -> f64 {
    titers.iter().sum()
}

/// IC50 implied by an IC80 on a Hill curve with slope `hill`.
pub fn ic50_from_ic80(ic80: f64, hill: f64) -> f64 {
    ic80 / 4f64.powf(1.0 / hill)
}

/// Fraction of virus neutralized by one antibody at serum dilution `dilution`.
pub fn hill_fraction(conc: f64, ic50: f64, hill: f64, dilution: f64) -> f64 {
    if !ic50.is_finite() || conc <= 0.0 {
        return 0.0;
    }
    let x = (conc / dilution / ic50).powf(hill);
    if x.is_infinite() {
        1.0
    } else {
        x / (1.0 + x)
    }
}

/// Combined neutralization under Bliss independence.
pub fn bliss_fraction(concs: &[f64], ic50s: &[f64], hills: &[f64], dilution: f64) -> f64 {
    let escape: f64 = concs
        .iter()
        .zip(ic50s)
        .zip(hills)
        .map(|((&c, &ic50), &h)| 1.0 - hill_fraction(c, ic50, h, dilution))
        .product();
    1.0 - escape
}

/// Dilution at which the Bliss-Hill combination neutralizes 80% of virus.
///
/// An infinite IC50 marks a resistant antibody. Combined neutralization is
/// strictly decreasing in dilution, so the root is bracketed from the most
/// potent single antibody and refined by bisection on log dilution.
pub fn combine_bliss_hill(concs: &[f64], ic50s: &[f64], hills: &[f64]) -> Result<f64> {
    if concs.len() != ic50s.len() || concs.len() != hills.len() {
        return Err(Error::invalid(
            "bliss_hill",
            "concentration, IC50 and Hill slope lists differ in length",
        ));
    }
    for (i, ((&c, &ic50), &h)) in concs.iter().zip(ic50s).zip(hills).enumerate() {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("concentrations[{i}]"), "must be non-negative"));
        }
        if ic50.is_nan() || ic50 <= 0.0 {
            return Err(Error::invalid(format!("ic50[{i}]"), "must be positive"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("hill[{i}]"), "must be positive"));
        }
    }
    if !ic50s.iter().any(|v| v.is_finite()) {
        return Err(Error::NoSensitiveAntibody);
    }

    // Dilution at which each antibody alone reaches 80%.
    let single_best = concs
        .iter()
        .zip(ic50s)
        .zip(hills)
        .filter(|((&c, ic50), _)| c > 0.0 && ic50.is_finite())
        .map(|((&c, &ic50), &h)| c / (ic50 * 4f64.powf(1.0 / h)))
        .fold(0.0, f64::max);
    if single_best == 0.0 {
        return Ok(0.0);
    }

    let f = |log_d: f64| bliss_fraction(concs, ic50s, hills, log_d.exp()) - TARGET_NEUTRALIZATION;
    let mut lo = single_best.ln();
    let mut hi = lo + std::f64::consts::LN_2;
    let mut expansions = 0;
    while f(hi) >= 0.0 {
        lo = hi;
        hi += std::f64::consts::LN_2;
        expansions += 1;
        if expansions > 2000 {
            return Err(Error::NonConvergence(
                "could not bracket the Bliss-Hill 80% dilution".into(),
            ));
        }
    }
    for _ in 0..200 {
        if hi - lo <= BLISS_HILL_RTOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo > BLISS_HILL_RTOL {
        return Err(Error::NonConvergence(
            "Bliss-Hill bisection did not reach tolerance".into(),
        ));
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_antibody_titer() {
        assert_eq!(single_ab_titer(400.0, 1.0), 400.0);
        assert_eq!(single_ab_titer(0.0, 3.0), 0.0);
        assert_eq!(single_ab_titer(10.0, 4.0), 2.5);
    }

    #[test]
    fn additivity() {
        assert_eq!(combine_additivity(&[100.0, 300.0]), 400.0);
        assert_eq!(combine_additivity(&[7.5]), 7.5);
        assert_eq!(combine_additivity(&[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn bliss_single_antibody_closed_form() {
        // f(d) = 0.8 at conc / d = 4 * ic50 for h = 1.
        let d = combine_bliss_hill(&[8.0], &[1.0], &[1.0]).unwrap();
        assert!((d - 2.0).abs() < 2e-6);
    }

    #[test]
    fn bliss_never_below_best_single() {
        let d1 = combine_bliss_hill(&[8.0], &[1.0], &[1.0]).unwrap();
        let d2 = combine_bliss_hill(&[8.0, 8.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(d2 >= d1);
    }

    #[test]
    fn resistant_antibodies() {
        let d = combine_bliss_hill(&[8.0, 50.0], &[1.0, f64::INFINITY], &[1.0, 1.0]).unwrap();
        assert!((d - 2.0).abs() < 2e-6);
        assert!(matches!(
            combine_bliss_hill(&[8.0], &[f64::INFINITY], &[1.0]),
            Err(Error::NoSensitiveAntibody)
        ));
        assert_eq!(combine_bliss_hill(&[0.0], &[1.0], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn ic50_conversion() {
        assert_eq!(ic50_from_ic80(4.0, 1.0), 1.0);
        assert!((ic50_from_ic80(4.0, 2.0) - 2.0).abs() < 1e-15);
        // The converted IC50 reproduces 80% neutralization at the IC80.
        for h in [0.5, 1.0, 1.7, 3.0] {
            let ic50 = ic50_from_ic80(2.5, h);
            assert!((hill_fraction(2.5, ic50, h, 1.0) - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_lengths() {
        assert!(combine_bliss_hill(&[1.0, 2.0], &[1.0], &[1.0]).is_err());
    }
}
