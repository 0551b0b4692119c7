//! Heat flow of characteristic polynomials of random matrices.
//!
//! The crate samples additive (elliptic) and multiplicative (GL Brownian)
//! random matrix models, applies the matching heat-type operators to their
//! characteristic polynomials in extended precision, tracks the zeros through
//! the resulting Calogero–Moser flows, and checks second-moment identities by
//! Monte Carlo.

// `!(x > 0.0)` is how NaN gets rejected alongside bad values; the indexed
// loops mirror Butcher tableaux.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

pub mod error;
pub mod models;
pub mod moment2;
pub mod mp;
pub mod observables;
pub mod pointset;
pub mod polyheat;
pub mod rootdyn;
#[cfg(feature = "cli")]
pub mod experiment;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use pointset::PointSet;

/// Which model family, heat operator and root flow is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Additive,
    Multiplicative,
}
