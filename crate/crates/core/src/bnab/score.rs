//! Regimen scores: mean over a virus panel of the area under the predicted
//! serum ID80 curve on a daily grid.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::neutralization::{combine_bliss_hill, ic50_from_ic80};
use super::panel::{CensorMode, VirusPanel};
use super::pk::{concentration_curve, DosingSchedule, PkParams};
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Default scoring window: 80 weeks.
pub const DEFAULT_WINDOW_DAYS: u32 = 560;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationModel {
    #[default]
    Additivity,
    BlissHill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AucScale {
    #[default]
    Linear,
    /// Integrate log10(1 + titer).
    Log10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Antibody {
    pub name: String,
    pub pk: PkParams,
    /// Hill slope used when the panel gives none for a virus.
    #[serde(default = "default_hill")]
    pub hill_slope: f64,
    /// Per-infusion dose overriding the schedule's mg/kg.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mg_per_kg: Option<f64>,
}

fn default_hill() -> f64 {
    1.0
}

fn default_window() -> u32 {
    DEFAULT_WINDOW_DAYS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regimen {
    pub name: String,
    pub antibodies: Vec<Antibody>,
    pub schedule: DosingSchedule,
    #[serde(default)]
    pub model: CombinationModel,
    #[serde(default = "default_window")]
    pub window_days: u32,
    #[serde(default)]
    pub censor_mode: CensorMode,
    #[serde(default)]
    pub auc_scale: AucScale,
}

impl Regimen {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let regimen: Regimen = serde_json::from_str(text)?;
        regimen.validate()?;
        Ok(regimen)
    }

    pub fn antibody_names(&self) -> Vec<&str> {
        self.antibodies.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn field_errors(&self) -> Vec<Error> {
        let mut errs = Vec::new();
        if self.antibodies.is_empty() {
            errs.push(Error::invalid("regimen.antibodies", "at least one antibody required"));
        }
        for (i, ab) in self.antibodies.iter().enumerate() {
            if ab.name.is_empty() {
                errs.push(Error::invalid(format!("regimen.antibodies[{i}].name"), "empty"));
            }
            if self.antibodies[..i].iter().any(|o| o.name == ab.name) {
                errs.push(Error::invalid(
                    format!("regimen.antibodies[{i}].name"),
                    format!("duplicate antibody '{}'", ab.name),
                ));
            }
            if let Err(e) = ab.pk.validate(&format!("regimen.antibodies[{i}].pk")) {
                errs.push(e);
            }
            if !(ab.hill_slope > 0.0 && ab.hill_slope.is_finite()) {
                errs.push(Error::invalid(
                    format!("regimen.antibodies[{i}].hill_slope"),
                    format!("must be positive, got {}", ab.hill_slope),
                ));
            }
            if let Some(d) = ab.mg_per_kg {
                if !(d > 0.0 && d.is_finite()) {
                    errs.push(Error::invalid(
                        format!("regimen.antibodies[{i}].mg_per_kg"),
                        format!("must be positive, got {d}"),
                    ));
                }
            }
        }
        if let Err(e) = self.schedule.validate("regimen.schedule") {
            errs.push(e);
        }
        if self.window_days < 1 {
            errs.push(Error::invalid("regimen.window_days", "must be at least 1"));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        match self.field_errors().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn schedule_for(&self, ab: &Antibody) -> DosingSchedule {
        let mut schedule = self.schedule.clone();
        if let Some(dose) = ab.mg_per_kg {
            for d in &mut schedule.doses {
                d.mg_per_kg = dose;
            }
        }
        schedule
    }

    /// Daily concentration curve for every antibody, in regimen order.
    pub fn concentration_curves(&self) -> Result<Vec<Vec<f64>>> {
        self.antibodies
            .iter()
            .map(|ab| concentration_curve(&ab.pk, &self.schedule_for(ab), self.window_days))
            .collect()
    }
}

/// Predicted ID80 on days 0..=window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiterCurve {
    pub virus_id: String,
    pub id80: Vec<f64>,
}

impl TiterCurve {
    pub fn window_days(&self) -> u32 {
        self.id80.len().saturating_sub(1) as u32
    }

    pub fn days(&self) -> impl Iterator<Item = u32> {
        0..self.id80.len() as u32
    }
}

/// Neutralization parameters of one antibody against one virus; None means resistant.
struct Sensitivity {
    ic80: Option<f64>,
    hill: f64,
}

fn sensitivities(regimen: &Regimen, panel: &VirusPanel, virus_id: &str) -> Result<Vec<Sensitivity>> {
    let names = regimen.antibody_names();
    let missing = panel.missing_pairs([virus_id], &names);
    if !missing.is_empty() {
        return Err(Error::PanelIncomplete { missing });
    }
    Ok(regimen
        .antibodies
        .iter()
        .map(|ab| {
            let entry = panel.get(virus_id, &ab.name).expect("coverage checked");
            let ic80 = match (entry.censored, regimen.censor_mode) {
                (true, CensorMode::Resistant) => None,
                _ => entry.ic80,
            };
            Sensitivity {
                ic80,
                hill: entry.hill_slope.unwrap_or(ab.hill_slope),
            }
        })
        .collect())
}

fn titer_curve(
    regimen: &Regimen,
    concs: &[Vec<f64>],
    sens: &[Sensitivity],
    virus_id: &str,
) -> Result<TiterCurve> {
    let days = regimen.window_days as usize + 1;
    let id80 = if sens.iter().all(|s| s.ic80.is_none()) {
        vec![0.0; days]
    } else {
        match regimen.model {
            CombinationModel::Additivity => (0..days)
                .map(|d| {
                    concs
                        .iter()
                        .zip(sens)
                        .filter_map(|(c, s)| s.ic80.map(|ic80| c[d] / ic80))
                        .sum()
                })
                .collect(),
            CombinationModel::BlissHill => {
                let ic50s: Vec<f64> = sens
                    .iter()
                    .map(|s| s.ic80.map_or(f64::INFINITY, |ic80| ic50_from_ic80(ic80, s.hill)))
                    .collect();
                let hills: Vec<f64> = sens.iter().map(|s| s.hill).collect();
                let mut day_concs = vec![0.0; concs.len()];
                (0..days)
                    .map(|d| {
                        for (slot, c) in day_concs.iter_mut().zip(concs) {
                            *slot = c[d];
                        }
                        combine_bliss_hill(&day_concs, &ic50s, &hills)
                    })
                    .collect::<Result<Vec<f64>>>()?
            }
        }
    };
    Ok(TiterCurve {
        virus_id: virus_id.to_string(),
        id80,
    })
}

/// Predicted ID80 curve of a regimen against one panel virus.
pub fn id80_curve(regimen: &Regimen, panel: &VirusPanel, virus_id: &str) -> Result<TiterCurve> {
    regimen.validate()?;
    let sens = sensitivities(regimen, panel, virus_id)?;
    let concs = regimen.concentration_curves()?;
    titer_curve(regimen, &concs, &sens, virus_id)
}

/// Trapezoidal area under the daily curve, in titer-days.
pub fn auc_score(curve: &TiterCurve, scale: AucScale) -> f64 {
    let values = curve.id80.iter().map(|&t| match scale {
        AucScale::Linear => t,
        AucScale::Log10 => (1.0 + t).log10(),
    });
    trapezoid(values)
}

fn trapezoid(values: impl Iterator<Item = f64>) -> f64 {
    let mut prev: Option<f64> = None;
    let mut area = 0.0;
    for v in values {
        if let Some(p) = prev {
            area += 0.5 * (p + v);
        }
        prev = Some(v);
    }
    area
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirusAuc {
    pub virus_id: String,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimenScore {
    pub regimen: String,
    pub per_virus_auc: Vec<VirusAuc>,
    /// Unweighted mean of the per-virus AUCs.
    pub score: f64,
    pub window_days: u32,
    pub model: CombinationModel,
    pub auc_scale: AucScale,
}

/// Per-virus curves for every panel virus, in panel order.
pub fn panel_curves(regimen: &Regimen, panel: &VirusPanel) -> Result<Vec<TiterCurve>> {
    regimen.validate()?;
    if panel.is_empty() {
        return Err(Error::EmptyInput("virus panel".into()));
    }
    panel.check_coverage(&regimen.antibody_names())?;
    let concs = regimen.concentration_curves()?;
    panel
        .viruses()
        .par_iter()
        .map(|v| {
            let sens = sensitivities(regimen, panel, v)?;
            titer_curve(regimen, &concs, &sens, v)
        })
        .collect()
}

pub fn regimen_score(regimen: &Regimen, panel: &VirusPanel) -> Result<RegimenScore> {
    let curves = panel_curves(regimen, panel)?;
    Ok(score_from_curves(regimen, &curves))
}

pub fn score_from_curves(regimen: &Regimen, curves: &[TiterCurve]) -> RegimenScore {
    let per_virus_auc: Vec<VirusAuc> = curves
        .iter()
        .map(|c| VirusAuc {
            virus_id: c.virus_id.clone(),
            auc: auc_score(c, regimen.auc_scale),
        })
        .collect();
    let score = per_virus_auc.iter().map(|v| v.auc).sum::<f64>() / per_virus_auc.len() as f64;
    RegimenScore {
        regimen: regimen.name.clone(),
        per_virus_auc,
        score,
        window_days: regimen.window_days,
        model: regimen.model,
        auc_scale: regimen.auc_scale,
    }
}

/// Participant-specific PK for each antibody of a regimen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantPk {
    pub participant_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_weight_kg: Option<f64>,
    pub pk: BTreeMap<String, PkParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantScores {
    pub regimen: String,
    pub scores: Vec<(String, f64)>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Scores the regimen once per participant and summarises the distribution
/// by its median and quartiles.
pub fn participant_scores(
    regimen: &Regimen,
    participants: &[ParticipantPk],
    panel: &VirusPanel,
) -> Result<ParticipantScores> {
    if participants.is_empty() {
        return Err(Error::EmptyInput("participants".into()));
    }
    let scores = participants
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut own = regimen.clone();
            if let Some(w) = p.body_weight_kg {
                own.schedule.body_weight_kg = w;
            }
            for ab in &mut own.antibodies {
                ab.pk = *p.pk.get(&ab.name).ok_or_else(|| {
                    Error::invalid(
                        format!("participants[{i}].pk"),
                        format!("no parameters for antibody '{}'", ab.name),
                    )
                })?;
            }
            Ok((p.participant_id.clone(), regimen_score(&own, panel)?.score))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<f64> = scores.iter().map(|s| s.1).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(ParticipantScores {
        regimen: regimen.name.clone(),
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedRegimen {
    /// 1-based; tied regimens share the rank of the first in their group.
    pub rank: usize,
    pub input_index: usize,
    pub regimen: String,
    pub score: f64,
    pub tied: bool,
}

/// Relative score difference below which regimens are considered tied.
pub const TIE_RTOL: f64 = 1e-9;

fn near_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_RTOL * a.abs().max(b.abs())
}

/// Orders regimens by descending score, keeping input order within ties.
pub fn rank_regimens(scores: &[RegimenScore]) -> Vec<RankedRegimen> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].score.total_cmp(&scores[a].score));

    let mut ranked = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && near_equal(scores[order[end - 1]].score, scores[order[end]].score)
        {
            end += 1;
        }
        let group = &mut order[start..end];
        group.sort_unstable();
        let tied = group.len() > 1;
        for &i in group.iter() {
            ranked.push(RankedRegimen {
                rank: start + 1,
                input_index: i,
                regimen: scores[i].regimen.clone(),
                score: scores[i].score,
                tied,
            });
        }
        start = end;
    }
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnab::panel::PanelEntry;

    fn curve(values: Vec<f64>) -> TiterCurve {
        TiterCurve {
            virus_id: "V".into(),
            id80: values,
        }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_score(&curve(vec![1.0; 561]), AucScale::Linear), 560.0);
        assert_eq!(auc_score(&curve(vec![0.0; 561]), AucScale::Linear), 0.0);
        let ramp: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(auc_score(&curve(ramp), AucScale::Linear), 5000.0);
        assert!((auc_score(&curve(vec![9.0; 11]), AucScale::Log10) - 10.0).abs() < 1e-12);
    }

    fn score(name: &str, s: f64) -> RegimenScore {
        RegimenScore {
            regimen: name.into(),
            per_virus_auc: vec![],
            score: s,
            window_days: 560,
            model: CombinationModel::Additivity,
            auc_scale: AucScale::Linear,
        }
    }

    #[test]
    fn ranking() {
        let r = rank_regimens(&[score("a", 3.0), score("b", 1.0), score("c", 2.0)]);
        let idx: Vec<usize> = r.iter().map(|x| x.input_index).collect();
        assert_eq!(idx, [0, 2, 1]);
        assert!(r.iter().all(|x| !x.tied));

        let r = rank_regimens(&[score("a", 5.0), score("b", 5.0 * (1.0 + 1e-12))]);
        assert_eq!(r[0].input_index, 0);
        assert!(r[0].tied && r[1].tied);
        assert_eq!(r[1].rank, 1);

        let r = rank_regimens(&[score("solo", 1.0)]);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].rank, 1);
    }

    fn flat_regimen(model: CombinationModel) -> Regimen {
        // CL -> 0 keeps the concentration at dose / V for the whole window.
        Regimen {
            name: "flat".into(),
            antibodies: vec![Antibody {
                name: "A".into(),
                pk: PkParams::one_compartment(1e-9, 5.0),
                hill_slope: 1.0,
                mg_per_kg: None,
            }],
            schedule: DosingSchedule::regular(1, 8.0, 10.0, 50.0),
            model,
            window_days: 30,
            censor_mode: CensorMode::Resistant,
            auc_scale: AucScale::Linear,
        }
    }

    fn entry(v: &str, a: &str, ic80: f64, censored: bool) -> PanelEntry {
        PanelEntry {
            virus_id: v.into(),
            antibody: a.into(),
            ic80: Some(ic80),
            censored,
            hill_slope: None,
        }
    }

    #[test]
    fn flat_curve_limit() {
        let panel = VirusPanel::from_entries(vec![entry("V1", "A", 4.0, false)]).unwrap();
        for model in [CombinationModel::Additivity, CombinationModel::BlissHill] {
            let c = id80_curve(&flat_regimen(model), &panel, "V1").unwrap();
            assert_eq!(c.id80.len(), 31);
            for t in &c.id80 {
                assert!((t - 25.0).abs() < 1e-5, "{model:?}: {t}");
            }
        }
    }

    #[test]
    fn censored_virus_gives_zero_curve() {
        let panel = VirusPanel::from_entries(vec![entry("V1", "A", 50.0, true)]).unwrap();
        for model in [CombinationModel::Additivity, CombinationModel::BlissHill] {
            let c = id80_curve(&flat_regimen(model), &panel, "V1").unwrap();
            assert!(c.id80.iter().all(|&t| t == 0.0));
        }
        let mut bound = flat_regimen(CombinationModel::Additivity);
        bound.censor_mode = CensorMode::UseBound;
        let c = id80_curve(&bound, &panel, "V1").unwrap();
        assert!((c.id80[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn missing_pair_is_error() {
        let panel = VirusPanel::from_entries(vec![entry("V1", "B", 1.0, false)]).unwrap();
        assert!(matches!(
            id80_curve(&flat_regimen(CombinationModel::Additivity), &panel, "V1"),
            Err(Error::PanelIncomplete { .. })
        ));
    }

    #[test]
    fn two_virus_mean() {
        let panel = VirusPanel::from_entries(vec![
            entry("V1", "A", 20.0, false),
            entry("V2", "A", 20.0 / 3.0, false),
        ])
        .unwrap();
        let s = regimen_score(&flat_regimen(CombinationModel::Additivity), &panel).unwrap();
        assert_eq!(s.per_virus_auc.len(), 2);
        // Curves are ~5 and ~15 over 30 days.
        assert!((s.score - 10.0 * 30.0).abs() < 1e-3);
    }

    #[test]
    fn empty_regimen_rejected() {
        let mut r = flat_regimen(CombinationModel::Additivity);
        r.antibodies.clear();
        assert!(r.validate().is_err());
        assert!(Regimen::from_json("{}").is_err());
    }

    #[test]
    fn participant_summary() {
        let panel = VirusPanel::from_entries(vec![entry("V1", "A", 4.0, false)]).unwrap();
        let regimen = flat_regimen(CombinationModel::Additivity);
        let people: Vec<ParticipantPk> = [2.5, 5.0, 10.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| ParticipantPk {
                participant_id: format!("p{i}"),
                body_weight_kg: None,
                pk: BTreeMap::from([("A".to_string(), PkParams::one_compartment(1e-9, v))]),
            })
            .collect();
        let s = participant_scores(&regimen, &people, &panel).unwrap();
        assert_eq!(s.scores.len(), 3);
        // Flat titers 50, 25, 12.5 over 30 days.
        assert!((s.median - 750.0).abs() < 1e-3);
        assert!(s.q1 < s.median && s.median < s.q3);
    }
}
