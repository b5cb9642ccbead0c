//! Design and analysis toolkit for two-arm HIV prevention efficacy trials.
//!
//! - [`design`]: closed-form event and sample-size requirements.
//! - [`sim`]: seeded Monte Carlo trials and log-rank power.
//! - [`counterfactual`]: efficacy versus a counterfactual placebo group.
//! - [`bnab`]: antibody regimen scoring from predicted neutralization titers.
//! - [`cli`]: the `prevtrial` command-line front end.

pub mod bnab;
pub mod cli;
pub mod counterfactual;
pub mod design;
pub mod error;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
