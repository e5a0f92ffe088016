//! Heterogeneous treatment-effect estimation for cluster-randomized
//! election panels.
//!
//! The pipeline: ingest a clustered panel ([`panel`]), cross-fit the
//! outcome nuisance ([`nuisance`]), run the residual-on-residual final
//! stage for the polynomial effect curve ([`estimator`]), compute
//! cluster-robust sandwich variances and Wald/z tests ([`inference`]),
//! and build uniform confidence bands and sup-statistic tests via a
//! clustered Gaussian multiplier bootstrap ([`bootstrap`]). A synthetic
//! generator with known ground truth ([`simgen`]) backs verification and
//! Monte Carlo studies.

pub mod bootstrap;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod linalg;
pub mod nuisance;
pub mod panel;
pub mod rng;
pub mod simgen;
pub mod stats;

pub use error::{Error, ErrorClass, Result};
