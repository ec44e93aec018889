//! Pragmatic hypothesis construction and agnostic (three-valued) testing.
//!
//! A precise hypothesis (a point or a lower-dimensional subset of the
//! parameter space) is enlarged into a *pragmatic* hypothesis: the set of
//! parameters whose predictions for a future experiment differ from some
//! point of the original hypothesis by at most `epsilon`, as measured by a
//! predictive dissimilarity. Three dissimilarities are implemented:
//!
//! - **KL** — relative entropy between the predictive laws,
//! - **BP** — relative excess loss of the best prediction, under a
//!   quadratic loss, passed through a monotone rescaling,
//! - **CD** — classification distance, i.e. half the total variation
//!   between the predictive laws.
//!
//! Pragmatic regions for composite hypotheses are unions of the singleton
//! neighborhoods, realized on deterministic parameter grids. Decisions are
//! taken by a region-estimator test: accept when the region estimate is
//! contained in the hypothesis, reject when it is disjoint from it, and
//! stay agnostic otherwise. The crate ships closed forms, adaptive
//! quadrature, exact enumeration and seeded Monte Carlo backends, plus the
//! Hardy-Weinberg, Gaussian and bioequivalence constructions exposed by
//! the `pragma` CLI.

// `!(x > 0.0)` is used on purpose throughout the validators: unlike
// `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agnostic;
pub mod dissimilarity;
pub mod error;
pub mod family;
pub mod grid;
pub mod numeric;
pub mod pragmatic;

pub use error::{PragmaError, Result};
