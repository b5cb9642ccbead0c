//! Scoring of broadly neutralizing antibody regimens by predicted serum
//! neutralization titer over a follow-up window.

pub mod neutralization;
pub mod panel;
pub mod pk;
pub mod score;

pub use neutralization::{
    combine_additivity, combine_bliss_hill, ic50_from_ic80, single_ab_titer,
};
pub use panel::{CensorMode, PanelEntry, VirusPanel};
pub use pk::{concentration_at, concentration_curve, Dose, DosingSchedule, PkModel, PkParams};
pub use score::{
    auc_score, id80_curve, participant_scores, rank_regimens, regimen_score, Antibody, AucScale,
    CombinationModel, ParticipantPk, RankedRegimen, Regimen, RegimenScore, TiterCurve,
};
