//! Linear pharmacokinetics for intravenous bolus dosing.
//!
//! Infusions are treated as instantaneous boluses and multiple doses are
//! superposed. Concentrations are mg/L, which equals µg/mL.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PkModel {
    OneCompartment,
    TwoCompartment,
}

/// Clearances in L/day, volumes in L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkParams {
    pub model: PkModel,
    pub clearance: f64,
    pub v_central: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercompartment_clearance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_peripheral: Option<f64>,
}

impl PkParams {
    pub fn one_compartment(clearance: f64, v_central: f64) -> Self {
        PkParams {
            model: PkModel::OneCompartment,
            clearance,
            v_central,
            intercompartment_clearance: None,
            v_peripheral: None,
        }
    }

    pub fn two_compartment(clearance: f64, v_central: f64, q: f64, v_peripheral: f64) -> Self {
        PkParams {
            model: PkModel::TwoCompartment,
            clearance,
            v_central,
            intercompartment_clearance: Some(q),
            v_peripheral: Some(v_peripheral),
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(
                    format!("{field}.{name}"),
                    format!("must be positive, got {v}"),
                ))
            }
        };
        positive("clearance", self.clearance)?;
        positive("v_central", self.v_central)?;
        match self.model {
            PkModel::OneCompartment => {
                if self.intercompartment_clearance.is_some() || self.v_peripheral.is_some() {
                    return Err(Error::invalid(
                        field,
                        "peripheral parameters given for a one-compartment model",
                    ));
                }
            }
            PkModel::TwoCompartment => {
                let q = self.intercompartment_clearance.ok_or_else(|| {
                    Error::invalid(
                        format!("{field}.intercompartment_clearance"),
                        "required for a two-compartment model",
                    )
                })?;
                let v2 = self.v_peripheral.ok_or_else(|| {
                    Error::invalid(
                        format!("{field}.v_peripheral"),
                        "required for a two-compartment model",
                    )
                })?;
                positive("intercompartment_clearance", q)?;
                positive("v_peripheral", v2)?;
            }
        }
        Ok(())
    }

    /// Central concentration per unit dose (1/L) at `t` days after a bolus.
    pub fn unit_response(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let k10 = self.clearance / self.v_central;
        match self.model {
            PkModel::OneCompartment => (-k10 * t).exp() / self.v_central,
            PkModel::TwoCompartment => {
                let (a, b, alpha, beta) = self.macro_constants();
                (a * (-alpha * t).exp() + b * (-beta * t).exp()) / self.v_central
            }
        }
    }

    /// Biexponential coefficients (A, B, alpha, beta) with A + B = 1.
    fn macro_constants(&self) -> (f64, f64, f64, f64) {
        let q = self.intercompartment_clearance.unwrap_or(0.0);
        let v2 = self.v_peripheral.unwrap_or(1.0);
        let k10 = self.clearance / self.v_central;
        let k12 = q / self.v_central;
        let k21 = q / v2;
        let sum = k10 + k12 + k21;
        let disc = (sum * sum - 4.0 * k10 * k21).sqrt();
        let alpha = 0.5 * (sum + disc);
        // product / alpha avoids cancellation when k10 * k21 is tiny.
        let beta = k10 * k21 / alpha;
        let a = (alpha - k21) / (alpha - beta);
        let b = (k21 - beta) / (alpha - beta);
        (a, b, alpha, beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dose {
    pub time_weeks: f64,
    pub mg_per_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosingSchedule {
    pub doses: Vec<Dose>,
    pub body_weight_kg: f64,
}

impl DosingSchedule {
    /// `count` infusions of `mg_per_kg`, `interval_weeks` apart, starting at week 0.
    pub fn regular(count: usize, interval_weeks: f64, mg_per_kg: f64, body_weight_kg: f64) -> Self {
        DosingSchedule {
            doses: (0..count)
                .map(|i| Dose {
                    time_weeks: i as f64 * interval_weeks,
                    mg_per_kg,
                })
                .collect(),
            body_weight_kg,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.doses.is_empty() {
            return Err(Error::invalid(format!("{field}.doses"), "at least one dose required"));
        }
        if !(self.body_weight_kg > 0.0 && self.body_weight_kg.is_finite()) {
            return Err(Error::invalid(
                format!("{field}.body_weight_kg"),
                format!("must be positive, got {}", self.body_weight_kg),
            ));
        }
        if self.doses[0].time_weeks != 0.0 {
            return Err(Error::invalid(
                format!("{field}.doses[0].time_weeks"),
                "first dose must be at week 0",
            ));
        }
        for (i, d) in self.doses.iter().enumerate() {
            if !(d.mg_per_kg > 0.0 && d.mg_per_kg.is_finite()) {
                return Err(Error::invalid(
                    format!("{field}.doses[{i}].mg_per_kg"),
                    format!("must be positive, got {}", d.mg_per_kg),
                ));
            }
            if i > 0 && d.time_weeks <= self.doses[i - 1].time_weeks {
                return Err(Error::invalid(
                    format!("{field}.doses[{i}].time_weeks"),
                    "dose times must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    pub fn last_dose_day(&self) -> f64 {
        self.doses.last().map_or(0.0, |d| d.time_weeks * 7.0)
    }

    /// (day, mg) for every dose.
    pub fn doses_mg(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.doses
            .iter()
            .map(|d| (d.time_weeks * 7.0, d.mg_per_kg * self.body_weight_kg))
    }
}

/// Serum concentration (µg/mL) on days 0..=window_days.
pub fn concentration_curve(
    pk: &PkParams,
    schedule: &DosingSchedule,
    window_days: u32,
) -> Result<Vec<f64>> {
    pk.validate("pk")?;
    schedule.validate("schedule")?;
    let last_dose_day = schedule.last_dose_day();
    if last_dose_day > window_days as f64 {
        return Err(Error::GridTooShort {
            window_days,
            last_dose_day,
        });
    }
    Ok((0..=window_days)
        .map(|day| concentration_at(pk, schedule, day as f64))
        .collect())
}

/// Concentration at time `t` days, superposing all doses given at or before `t`.
pub fn concentration_at(pk: &PkParams, schedule: &DosingSchedule, t: f64) -> f64 {
    schedule
        .doses_mg()
        .take_while(|&(day, _)| day <= t)
        .map(|(day, mg)| mg * pk.unit_response(t - day))
        .sum()
}
