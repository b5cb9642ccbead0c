//! C ABI for prevtrial.
//!
//! Every fallible function returns a [`PrevtrialStatus`]. On failure the
//! message is available from [`prevtrial_last_error`] on the same thread
//! until the next call. Panics are caught at the boundary and reported as
//! `PREVTRIAL_STATUS_PANIC`.
//!
//! Virus panels and regimens are opaque handles; release them with their
//! `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use prevtrial::bnab::{self, Regimen, VirusPanel};
use prevtrial::counterfactual::{self, ArmSummary, EfficacyParameter, ThetaCInterval};
use prevtrial::design::{
    self, Allocation, DesignKind, DesignSpec, DropoutMode, EventAccrualModel, HypothesisPair,
    IncidenceScenario,
};
use prevtrial::{sim, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrevtrialStatus {
    Ok = 0,
    /// Null pointer, invalid UTF-8 or an out-of-range enum code.
    InvalidArgument = 1,
    Validation = 2,
    Io = 3,
    NonConvergence = 4,
    Panic = 5,
}

pub const PREVTRIAL_DESIGN_LAYER: u32 = 0;
pub const PREVTRIAL_DESIGN_COMPARE: u32 = 1;
pub const PREVTRIAL_DESIGN_COMBINE: u32 = 2;

pub const PREVTRIAL_MODEL_EXPONENTIAL: u32 = 0;
pub const PREVTRIAL_MODEL_LINEAR: u32 = 1;

pub const PREVTRIAL_DROPOUT_TOTAL: u32 = 0;
pub const PREVTRIAL_DROPOUT_ANNUAL: u32 = 1;

pub const PREVTRIAL_PARAMETER_PE: u32 = 0;
pub const PREVTRIAL_PARAMETER_AIR: u32 = 1;

/// Plain-data trial design. Fill with `prevtrial_design_default` first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PrevtrialDesign {
    pub kind: u32,
    pub pe_null: f64,
    pub pe_alt: f64,
    pub one_sided_alpha: f64,
    pub power: f64,
    pub followup_years: f64,
    pub accrual_years: f64,
    pub dropout: f64,
    pub dropout_mode: u32,
    pub allocation_arm1: u32,
    pub allocation_arm2: u32,
    pub model: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PrevtrialSampleSize {
    pub events: u64,
    pub n_total: u64,
    pub n_arm1: u64,
    pub n_arm2: u64,
    pub event_probability_arm1: f64,
    pub event_probability_arm2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PrevtrialPower {
    pub rejection_rate: f64,
    pub mc_halfwidth_95: f64,
    pub replicates: u64,
    pub no_event_replicates: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PrevtrialEfficacy {
    pub rate_ratio: f64,
    pub theta_c: f64,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ui_low: f64,
    pub ui_high: f64,
}

/// Opaque virus panel.
pub struct PrevtrialPanel(VirusPanel);

/// Opaque bnAb regimen.
pub struct PrevtrialRegimen(Regimen);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(PrevtrialStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            3 => PrevtrialStatus::Io,
            4 => PrevtrialStatus::NonConvergence,
            _ => PrevtrialStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure(PrevtrialStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PrevtrialStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrevtrialStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic in prevtrial".into());
            PrevtrialStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| bad(format!("{name} is null")))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| bad(format!("{name} is null")))
}

unsafe fn in_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(bad(format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| bad(format!("{name} is not valid UTF-8")))
}

impl PrevtrialDesign {
    fn to_spec(self) -> Result<DesignSpec, Failure> {
        let kind = match self.kind {
            PREVTRIAL_DESIGN_LAYER => DesignKind::Layer,
            PREVTRIAL_DESIGN_COMPARE => DesignKind::Compare,
            PREVTRIAL_DESIGN_COMBINE => DesignKind::Combine,
            k => return Err(bad(format!("kind: unknown code {k}"))),
        };
        let model = match self.model {
            PREVTRIAL_MODEL_EXPONENTIAL => EventAccrualModel::ExponentialDepletion,
            PREVTRIAL_MODEL_LINEAR => EventAccrualModel::LinearPersonTime,
            m => return Err(bad(format!("model: unknown code {m}"))),
        };
        let dropout_mode = match self.dropout_mode {
            PREVTRIAL_DROPOUT_TOTAL => DropoutMode::TotalOverFollowup,
            PREVTRIAL_DROPOUT_ANNUAL => DropoutMode::Annual,
            m => return Err(bad(format!("dropout_mode: unknown code {m}"))),
        };
        let mut hyp = HypothesisPair::new(self.pe_null, self.pe_alt);
        hyp.one_sided_alpha = self.one_sided_alpha;
        hyp.power = self.power;
        let mut spec = DesignSpec::new(kind, hyp).with_model(model);
        spec.followup_years = self.followup_years;
        spec.accrual_years = self.accrual_years;
        spec.annual_dropout = self.dropout;
        spec.dropout_mode = dropout_mode;
        spec.allocation = Allocation::new(self.allocation_arm1, self.allocation_arm2)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next prevtrial call on the same thread.
#[no_mangle]
pub extern "C" fn prevtrial_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library defaults: Layer, H0 PE 0, H1 PE 0.5, one-sided alpha 0.025,
/// power 0.9, two years of follow-up, 10% total dropout, 1:1, linear model.
///
/// # Safety
/// `out` must be null or point to writable memory for one `PrevtrialDesign`.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_design_default(out: *mut PrevtrialDesign) -> PrevtrialStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = DesignSpec::new(DesignKind::Layer, HypothesisPair::new(0.0, 0.5));
        *out = PrevtrialDesign {
            kind: PREVTRIAL_DESIGN_LAYER,
            pe_null: spec.hypotheses.pe_null,
            pe_alt: spec.hypotheses.pe_alt,
            one_sided_alpha: spec.hypotheses.one_sided_alpha,
            power: spec.hypotheses.power,
            followup_years: spec.followup_years,
            accrual_years: spec.accrual_years,
            dropout: spec.annual_dropout,
            dropout_mode: PREVTRIAL_DROPOUT_TOTAL,
            allocation_arm1: spec.allocation.arm1,
            allocation_arm2: spec.allocation.arm2,
            model: PREVTRIAL_MODEL_LINEAR,
        };
        Ok(())
    })
}

/// # Safety
/// `design` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_required_events(
    design: *const PrevtrialDesign,
    out: *mut u64,
) -> PrevtrialStatus {
    guard(|| {
        let spec = in_ref(design, "design")?.to_spec()?;
        let out = out_ref(out, "out")?;
        *out = design::required_events(&spec.hypotheses, &spec.allocation)?;
        Ok(())
    })
}

/// # Safety
/// `design` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_sample_size(
    design: *const PrevtrialDesign,
    incidence_arm1: f64,
    incidence_arm2: f64,
    out: *mut PrevtrialSampleSize,
) -> PrevtrialStatus {
    guard(|| {
        let spec = in_ref(design, "design")?.to_spec()?;
        let out = out_ref(out, "out")?;
        let scen = IncidenceScenario::new(incidence_arm1, incidence_arm2);
        let n = design::total_sample_size(&spec, &scen)?;
        *out = PrevtrialSampleSize {
            events: n.events,
            n_total: n.n_total,
            n_arm1: n.n_arm1,
            n_arm2: n.n_arm2,
            event_probability_arm1: n.event_probability_arm1,
            event_probability_arm2: n.event_probability_arm2,
        };
        Ok(())
    })
}

/// Monte Carlo power of the one-sided log-rank test. Results depend only on
/// the inputs and `seed`, not on the thread count.
///
/// # Safety
/// `design` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_power(
    design: *const PrevtrialDesign,
    incidence_arm1: f64,
    incidence_arm2: f64,
    n_total: u64,
    replicates: u64,
    seed: u64,
    out: *mut PrevtrialPower,
) -> PrevtrialStatus {
    guard(|| {
        let spec = in_ref(design, "design")?.to_spec()?;
        let out = out_ref(out, "out")?;
        let scen = IncidenceScenario::new(incidence_arm1, incidence_arm2);
        let est = sim::estimate_power(&spec, &scen, n_total as usize, replicates as usize, seed)?;
        *out = PrevtrialPower {
            rejection_rate: est.rejection_rate,
            mc_halfwidth_95: est.mc_halfwidth_95,
            replicates: est.mc_replicates as u64,
            no_event_replicates: est.no_event_replicates as u64,
        };
        Ok(())
    })
}

/// Efficacy of the experimental arm against a counterfactual placebo, with
/// the sampling interval at `theta_low` and the interval over
/// `[theta_low, theta_high]`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_counterfactual(
    experimental_events: u64,
    experimental_person_years: f64,
    control_events: u64,
    control_person_years: f64,
    theta_low: f64,
    theta_high: f64,
    parameter: u32,
    out: *mut PrevtrialEfficacy,
) -> PrevtrialStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let parameter = match parameter {
            PREVTRIAL_PARAMETER_PE => EfficacyParameter::PreventionEfficacy,
            PREVTRIAL_PARAMETER_AIR => EfficacyParameter::AvertedInfectionsRatio,
            p => return Err(bad(format!("parameter: unknown code {p}"))),
        };
        let exp = ArmSummary::new(experimental_events, experimental_person_years);
        let ctl = ArmSummary::new(control_events, control_person_years);
        exp.validate("experimental")?;
        ctl.validate("control")?;
        let theta = ThetaCInterval::new(theta_low, theta_high)?;
        let ratio = counterfactual::rate_ratio(&exp, &ctl)?;
        let est = counterfactual::uncertainty_interval_for(&ratio, &theta, parameter)?;
        *out = PrevtrialEfficacy {
            rate_ratio: ratio.rr,
            theta_c: est.theta_c,
            point: est.point,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            ui_low: est.ui_low,
            ui_high: est.ui_high,
        };
        Ok(())
    })
}

/// Loads a virus panel CSV (`virus_id,antibody,ic80_ug_ml[,hill_slope]`).
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_panel_open(
    path: *const c_char,
    out: *mut *mut PrevtrialPanel,
) -> PrevtrialStatus {
    guard(|| {
        let path = in_str(path, "path")?;
        let out = out_ref(out, "out")?;
        let panel = VirusPanel::from_path(path)?;
        *out = Box::into_raw(Box::new(PrevtrialPanel(panel)));
        Ok(())
    })
}

/// # Safety
/// `panel` must be null or a handle from `prevtrial_panel_open` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_panel_free(panel: *mut PrevtrialPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Number of distinct viruses, or 0 for a null handle.
///
/// # Safety
/// `panel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_panel_virus_count(panel: *const PrevtrialPanel) -> u64 {
    panel.as_ref().map_or(0, |p| p.0.viruses().len() as u64)
}

/// Parses a regimen from JSON text.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_regimen_from_json(
    json: *const c_char,
    out: *mut *mut PrevtrialRegimen,
) -> PrevtrialStatus {
    guard(|| {
        let json = in_str(json, "json")?;
        let out = out_ref(out, "out")?;
        let regimen = Regimen::from_json(json)?;
        *out = Box::into_raw(Box::new(PrevtrialRegimen(regimen)));
        Ok(())
    })
}

/// # Safety
/// `regimen` must be null or a handle from `prevtrial_regimen_from_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_regimen_free(regimen: *mut PrevtrialRegimen) {
    if !regimen.is_null() {
        drop(Box::from_raw(regimen));
    }
}

/// Mean AUC of the predicted ID80 curve over the panel.
///
/// # Safety
/// Handles must be null or live; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prevtrial_regimen_score(
    regimen: *const PrevtrialRegimen,
    panel: *const PrevtrialPanel,
    out: *mut f64,
) -> PrevtrialStatus {
    guard(|| {
        let regimen = &in_ref(regimen, "regimen")?.0;
        let panel = &in_ref(panel, "panel")?.0;
        let out = out_ref(out, "out")?;
        *out = bnab::regimen_score(regimen, panel)?.score;
        Ok(())
    })
}
