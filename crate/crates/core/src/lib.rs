//! Construction, transformation and membership testing for bipartite
//! quantum correlation sets.
//!
//! A [`Correlation`] is the tensor `p(i, j | x, y)` of joint outcome
//! probabilities. Maximally entangled correlations are represented by
//! [`MaxEntRep`] and evaluated through the normalized trace
//! `p(i, j | x, y) = Tr(E_{x,i} F_{y,j}) / d`, with Bob's operators stored
//! already transposed into the canonical basis.
//!
//! The crate is organized by the transformations it offers:
//!
//! * [`correlation`]: the tensor type, validity and structure predicates.
//! * [`operators`]: operator measures, representations and their evaluation.
//! * [`constructions`]: rational convex combinations by block direct sums.
//! * [`corners`]: corner projections and synchronous lifts.
//! * [`dilation`]: rounding and dilation of commuting POVMs to PVMs.
//! * [`membership`]: local-polytope membership with dual certificates.

pub mod constructions;
pub mod corners;
pub mod correlation;
pub mod dilation;
mod error;
mod json;
pub mod linalg;
pub mod membership;
pub mod operators;
pub mod rational;
pub mod rng;
pub mod simplex;

pub use constructions::{BlockPlan, DEFAULT_MAX_DIM};
pub use correlation::{Correlation, MarginalPair, ValidityReport};
pub use dilation::{DilatedRep, DilationOptions};
pub use error::{Error, Result};
pub use membership::{BellFunctional, MembershipVerdict};
pub use operators::{HermMatrix, MaxEntRep, MeasureKind, OperatorMeasure, SchmidtForm, StateRep};
pub use rational::RationalWeight;

/// Tolerance for identities that hold exactly in rational arithmetic.
pub const EXACT_TOL: f64 = 1e-12;

/// Tolerance for quantities produced by eigensolvers and linear programs.
pub const FLOAT_TOL: f64 = 1e-9;
