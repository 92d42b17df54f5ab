//! Nested zero-inflated generalized Poisson (ZIGP) regression for international
//! football: weighted per-team fitting on Elo covariates, exact score tables,
//! Monte Carlo tournament simulation and scoring-rule validation.

pub mod elo;
pub mod error;
pub mod match_data;
pub mod match_model;
pub mod regression;
pub mod tournament;
pub mod validation;
pub mod zigp_dist;

pub use error::{Error, Result};
