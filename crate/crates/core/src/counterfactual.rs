//! Efficacy relative to a counterfactual placebo group.
//!
//! `theta_c` is the proportionate reduction in incidence of the control
//! regimen versus an unenrolled placebo group. It is never estimated from
//! the trial; callers supply an interval of plausible values and the
//! uncertainty interval envelopes sampling confidence intervals over it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{gamma_quantile, normal_quantile};

/// Two-sided 95% normal critical value.
fn z95() -> f64 {
    normal_quantile(0.975)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub events: u64,
    pub person_years: f64,
}

impl ArmSummary {
    pub fn new(events: u64, person_years: f64) -> Self {
        ArmSummary {
            events,
            person_years,
        }
    }

    pub fn rate(&self) -> f64 {
        self.events as f64 / self.person_years
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.person_years > 0.0 && self.person_years.is_finite()) {
            return Err(Error::invalid(
                format!("{field}.person_years"),
                format!("must be positive, got {}", self.person_years),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaCInterval {
    pub low: f64,
    pub high: f64,
}

impl ThetaCInterval {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        let t = ThetaCInterval { low, high };
        t.validate()?;
        Ok(t)
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::new(value, value)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.low) {
            return Err(Error::invalid(
                "theta_c.low",
                format!("must be in [0, 1), got {}", self.low),
            ));
        }
        if !(self.high >= self.low && self.high < 1.0) {
            return Err(Error::invalid(
                "theta_c.high",
                format!("must be in [low, 1), got {}", self.high),
            ));
        }
        Ok(())
    }

    /// `n` evenly spaced values from low to high inclusive.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let step = if n > 1 {
            (self.high - self.low) / (n - 1) as f64
        } else {
            0.0
        };
        (0..n).map(move |i| {
            if i + 1 == n {
                self.high
            } else {
                self.low + step * i as f64
            }
        })
    }
}

/// Handling of a zero experimental event count in the rate ratio interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroEventCorrection {
    /// Upper limit computed with 0.5 experimental events; lower limit 0.
    #[default]
    Half,
    /// No upper limit (reported as infinity).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRatio {
    pub rr: f64,
    /// Standard error of log rr; absent when the experimental arm has no events.
    pub log_se: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Set when the interval is one-sided because of zero experimental events.
    pub one_sided: bool,
}

impl RateRatio {
    /// A rate ratio with no sampling error.
    pub fn exact(rr: f64) -> Self {
        RateRatio {
            rr,
            log_se: Some(0.0),
            ci_low: rr,
            ci_high: rr,
            one_sided: false,
        }
    }
}

/// Experimental-to-control incidence rate ratio with a Wald interval on the
/// log scale.
pub fn rate_ratio(exp: &ArmSummary, ctl: &ArmSummary) -> Result<RateRatio> {
    rate_ratio_with(exp, ctl, ZeroEventCorrection::default())
}

pub fn rate_ratio_with(
    exp: &ArmSummary,
    ctl: &ArmSummary,
    correction: ZeroEventCorrection,
) -> Result<RateRatio> {
    exp.validate("experimental")?;
    ctl.validate("control")?;
    if ctl.events == 0 {
        return Err(Error::NoControlEvents);
    }
    let z = z95();
    if exp.events == 0 {
        let ci_high = match correction {
            ZeroEventCorrection::Half => {
                let rr = (0.5 / exp.person_years) / ctl.rate();
                let se = (2.0 + 1.0 / ctl.events as f64).sqrt();
                rr * (z * se).exp()
            }
            ZeroEventCorrection::None => f64::INFINITY,
        };
        return Ok(RateRatio {
            rr: 0.0,
            log_se: None,
            ci_low: 0.0,
            ci_high,
            one_sided: true,
        });
    }
    let rr = exp.rate() / ctl.rate();
    let se = (1.0 / exp.events as f64 + 1.0 / ctl.events as f64).sqrt();
    Ok(RateRatio {
        rr,
        log_se: Some(se),
        ci_low: rr * (-z * se).exp(),
        ci_high: rr * (z * se).exp(),
        one_sided: false,
    })
}

fn check_theta(theta_c: f64) -> Result<()> {
    if !(0.0..1.0).contains(&theta_c) {
        return Err(Error::invalid(
            "theta_c",
            format!("must be in [0, 1), got {theta_c}"),
        ));
    }
    Ok(())
}

/// Prevention efficacy of the experimental regimen versus counterfactual
/// placebo: 1 - rr * (1 - theta_c).
pub fn pe_vs_counterfactual(rr: f64, theta_c: f64) -> Result<f64> {
    check_theta(theta_c)?;
    Ok(1.0 - rr * (1.0 - theta_c))
}

/// Infections averted by the experimental regimen per infection averted by
/// the control regimen, both against counterfactual placebo.
pub fn averted_infections_ratio(rr: f64, theta_c: f64) -> Result<f64> {
    check_theta(theta_c)?;
    if theta_c == 0.0 {
        return Err(Error::ThetaCZero);
    }
    Ok((1.0 - rr * (1.0 - theta_c)) / theta_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficacyParameter {
    #[serde(rename = "pe")]
    PreventionEfficacy,
    #[serde(rename = "air")]
    AvertedInfectionsRatio,
}

impl EfficacyParameter {
    pub fn label(self) -> &'static str {
        match self {
            EfficacyParameter::PreventionEfficacy => "pe",
            EfficacyParameter::AvertedInfectionsRatio => "air",
        }
    }

    fn eval(self, rr: f64, theta_c: f64) -> Result<f64> {
        match self {
            EfficacyParameter::PreventionEfficacy => pe_vs_counterfactual(rr, theta_c),
            EfficacyParameter::AvertedInfectionsRatio => averted_infections_ratio(rr, theta_c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficacyEstimate {
    pub parameter: EfficacyParameter,
    /// theta_c at which `point` and the sampling interval are evaluated.
    pub theta_c: f64,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ui_low: f64,
    pub ui_high: f64,
}

pub const THETA_GRID_POINTS: usize = 101;

/// Sampling 95% interval for the parameter at a fixed theta_c. Both
/// parameters decrease in rr, so the log-scale rate ratio limits map to
/// swapped parameter limits.
pub fn sampling_interval(
    ratio: &RateRatio,
    theta_c: f64,
    parameter: EfficacyParameter,
) -> Result<(f64, f64)> {
    let low = parameter.eval(ratio.ci_high, theta_c)?;
    let high = parameter.eval(ratio.ci_low, theta_c)?;
    Ok((low, high))
}

/// Point estimate at the conservative end `theta.low`, its sampling
/// interval, and the envelope of sampling intervals over a 101-point grid
/// spanning the theta_c interval.
pub fn uncertainty_interval_for(
    ratio: &RateRatio,
    theta: &ThetaCInterval,
    parameter: EfficacyParameter,
) -> Result<EfficacyEstimate> {
    theta.validate()?;
    let point = parameter.eval(ratio.rr, theta.low)?;
    let (ci_low, ci_high) = sampling_interval(ratio, theta.low, parameter)?;
    let mut ui_low = ci_low;
    let mut ui_high = ci_high;
    for t in theta.grid(THETA_GRID_POINTS) {
        let (lo, hi) = sampling_interval(ratio, t, parameter)?;
        ui_low = ui_low.min(lo);
        ui_high = ui_high.max(hi);
    }
    Ok(EfficacyEstimate {
        parameter,
        theta_c: theta.low,
        point,
        ci_low,
        ci_high,
        ui_low,
        ui_high,
    })
}

pub fn uncertainty_interval(
    exp: &ArmSummary,
    ctl: &ArmSummary,
    theta: &ThetaCInterval,
    parameter: EfficacyParameter,
) -> Result<EfficacyEstimate> {
    let ratio = rate_ratio(exp, ctl)?;
    uncertainty_interval_for(&ratio, theta, parameter)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdditiveDifference {
    /// Arm-2 incidence minus arm-1 incidence, per person-year.
    pub diff: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Incidence difference with a Poisson Wald interval.
pub fn additive_difference(arm1: &ArmSummary, arm2: &ArmSummary) -> Result<AdditiveDifference> {
    arm1.validate("arm1")?;
    arm2.validate("arm2")?;
    let (r1, r2) = (arm1.rate(), arm2.rate());
    let se = (r1 / arm1.person_years + r2 / arm2.person_years).sqrt();
    let half = z95() * se;
    let diff = r2 - r1;
    Ok(AdditiveDifference {
        diff,
        se,
        ci_low: diff - half,
        ci_high: diff + half,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentinelCohort {
    pub label: String,
    pub calendar_window: String,
    #[serde(flatten)]
    pub summary: ArmSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledIncidence {
    pub calendar_window: String,
    pub cohorts: usize,
    pub events: u64,
    pub person_years: f64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Garwood exact 95% interval for a Poisson count, as a rate.
pub fn exact_poisson_interval(events: u64, person_years: f64) -> (f64, f64) {
    let low = if events == 0 {
        0.0
    } else {
        gamma_quantile(events as f64, 0.025)
    };
    let high = gamma_quantile(events as f64 + 1.0, 0.975);
    (low / person_years, high / person_years)
}

/// Pools cohorts sharing a calendar window, in order of first appearance.
pub fn sentinel_pooled_incidence(cohorts: &[SentinelCohort]) -> Result<Vec<PooledIncidence>> {
    if cohorts.is_empty() {
        return Err(Error::EmptyInput("sentinel cohorts".into()));
    }
    let mut pooled: Vec<PooledIncidence> = Vec::new();
    for (i, c) in cohorts.iter().enumerate() {
        c.summary.validate(&format!("cohorts[{i}]"))?;
        match pooled
            .iter_mut()
            .find(|p| p.calendar_window == c.calendar_window)
        {
            Some(p) => {
                p.cohorts += 1;
                p.events += c.summary.events;
                p.person_years += c.summary.person_years;
            }
            None => pooled.push(PooledIncidence {
                calendar_window: c.calendar_window.clone(),
                cohorts: 1,
                events: c.summary.events,
                person_years: c.summary.person_years,
                rate: 0.0,
                ci_low: 0.0,
                ci_high: 0.0,
            }),
        }
    }
    for p in &mut pooled {
        p.rate = p.events as f64 / p.person_years;
        (p.ci_low, p.ci_high) = exact_poisson_interval(p.events, p.person_years);
    }
    Ok(pooled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_ratio_examples() {
        let r = rate_ratio(&ArmSummary::new(30, 1000.0), &ArmSummary::new(50, 1000.0)).unwrap();
        assert!((r.rr - 0.6).abs() < 1e-15);
        let r = rate_ratio(&ArmSummary::new(50, 1000.0), &ArmSummary::new(50, 1000.0)).unwrap();
        assert_eq!(r.rr, 1.0);
        assert!((r.log_se.unwrap() - 0.2).abs() < 1e-15);
        assert!((r.ci_low * r.ci_high - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_ratio_boundaries() {
        let r = rate_ratio(&ArmSummary::new(0, 1000.0), &ArmSummary::new(50, 1000.0)).unwrap();
        assert_eq!(r.rr, 0.0);
        assert!(r.one_sided);
        assert!(r.ci_high > 0.0 && r.ci_high.is_finite());
        let r = rate_ratio_with(
            &ArmSummary::new(0, 1000.0),
            &ArmSummary::new(50, 1000.0),
            ZeroEventCorrection::None,
        )
        .unwrap();
        assert_eq!(r.ci_high, f64::INFINITY);
        assert!(matches!(
            rate_ratio(&ArmSummary::new(3, 1000.0), &ArmSummary::new(0, 1000.0)),
            Err(Error::NoControlEvents)
        ));
        assert!(rate_ratio(&ArmSummary::new(3, 0.0), &ArmSummary::new(5, 1.0)).is_err());
    }

    #[test]
    fn pe_and_air_examples() {
        assert_eq!(pe_vs_counterfactual(1.0, 0.0).unwrap(), 0.0);
        assert!((pe_vs_counterfactual(0.6, 0.5).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(pe_vs_counterfactual(2.0, 0.5).unwrap(), 0.0);
        assert_eq!(averted_infections_ratio(1.0, 0.5).unwrap(), 1.0);
        assert!((averted_infections_ratio(0.6, 0.5).unwrap() - 1.4).abs() < 1e-15);
        assert_eq!(averted_infections_ratio(2.0, 0.5).unwrap(), 0.0);
        assert!(matches!(averted_infections_ratio(0.5, 0.0), Err(Error::ThetaCZero)));
        assert!(pe_vs_counterfactual(0.5, 1.0).is_err());
    }

    #[test]
    fn degenerate_theta_interval_is_sampling_ci() {
        let exp = ArmSummary::new(20, 1500.0);
        let ctl = ArmSummary::new(35, 1500.0);
        let theta = ThetaCInterval::point(0.4).unwrap();
        let est =
            uncertainty_interval(&exp, &ctl, &theta, EfficacyParameter::PreventionEfficacy).unwrap();
        assert_eq!((est.ui_low, est.ui_high), (est.ci_low, est.ci_high));
        assert!(est.ci_low <= est.point && est.point <= est.ci_high);
    }

    #[test]
    fn exact_ratio_envelope() {
        let theta = ThetaCInterval::new(0.4, 0.7).unwrap();
        let est = uncertainty_interval_for(
            &RateRatio::exact(0.6),
            &theta,
            EfficacyParameter::PreventionEfficacy,
        )
        .unwrap();
        assert!((est.ui_low - 0.64).abs() < 1e-12);
        assert!((est.ui_high - 0.82).abs() < 1e-12);
        assert!((est.point - 0.64).abs() < 1e-12);
    }

    #[test]
    fn air_requires_positive_theta() {
        let theta = ThetaCInterval::new(0.0, 0.5).unwrap();
        assert!(matches!(
            uncertainty_interval_for(
                &RateRatio::exact(0.6),
                &theta,
                EfficacyParameter::AvertedInfectionsRatio
            ),
            Err(Error::ThetaCZero)
        ));
    }

    #[test]
    fn additive_difference_examples() {
        let same = additive_difference(&ArmSummary::new(5, 100.0), &ArmSummary::new(5, 100.0));
        assert_eq!(same.unwrap().diff, 0.0);
        let d = additive_difference(&ArmSummary::new(3, 2000.0), &ArmSummary::new(9, 2000.0))
            .unwrap();
        assert!((d.diff - 0.003).abs() < 1e-15);
        let half = (d.ci_high - d.ci_low) / 2.0;
        assert!((half - 0.003_395).abs() < 5e-6);
    }

    #[test]
    fn sentinel_pooling() {
        let c = |label: &str, window: &str, e, py| SentinelCohort {
            label: label.into(),
            calendar_window: window.into(),
            summary: ArmSummary::new(e, py),
        };
        let one = sentinel_pooled_incidence(&[c("a", "2016-2020", 40, 1000.0)]).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].rate - 0.04).abs() < 1e-15);
        let two = sentinel_pooled_incidence(&[
            c("a", "2016-2020", 40, 1000.0),
            c("b", "2016-2020", 40, 1000.0),
            c("c", "2021-2024", 0, 500.0),
        ])
        .unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].cohorts, 2);
        assert!((two[0].rate - 0.04).abs() < 1e-15);
        assert!(two[0].ci_high - two[0].ci_low < one[0].ci_high - one[0].ci_low);
        assert_eq!(two[1].ci_low, 0.0);
        assert!(matches!(sentinel_pooled_incidence(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn theta_grid_endpoints() {
        let t = ThetaCInterval::new(0.2, 0.6).unwrap();
        let g: Vec<f64> = t.grid(101).collect();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.2);
        assert_eq!(g[100], 0.6);
        assert!(ThetaCInterval::new(0.5, 0.4).is_err());
    }
}
