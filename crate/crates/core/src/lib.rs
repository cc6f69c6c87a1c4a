//! Chebyshev-distance DEA super-efficiency scoring for panels of
//! decision-making units, with a random-time-effects second-stage panel
//! regression on logistic-linearized scores.
//!
//! - [`linprog`]: dense two-phase simplex used by every DEA model
//! - [`dataset`]: long-format panel ingestion, lag alignment, exclusions
//! - [`dea`]: Chebyshev-distance scoring and the classical CCR model
//! - [`secondstage`]: logistic linearization and FGLS with random time effects
//! - [`report`]: kernel densities, histograms and curve exports
//! - [`pipeline`]: declarative run configuration and the `score`/`regress`/`report`/`demo` stages

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod dea;
mod error;
pub mod exec;
pub mod linprog;
pub mod pipeline;
pub mod published;
pub mod report;
pub mod secondstage;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
