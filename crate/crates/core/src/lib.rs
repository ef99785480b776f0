//! Edge-weighted online stochastic matching under Poisson arrivals.
//!
//! The pipeline is:
//!
//! 1. [`lp`] solves the Jaillet-Lu LP (or the plain matching LP) for an
//!    [`Instance`], producing a [`FractionalMatching`].
//! 2. [`preprocess`] pads and splits that solution so every online type has
//!    either one neighbor with `x = λ` (first class) or two neighbors with
//!    `x = λ/2` each (second class).
//! 3. [`engine`] simulates the Multistage Suggested Matching policy (and the
//!    Suggested Matching baseline) on sampled Poisson arrivals and collects
//!    per-edge statistics.
//! 4. [`bounds`] evaluates the closed-form survival bounds and per-edge
//!    competitive ratios the simulation is checked against.

pub mod bounds;
pub mod classify;
pub mod engine;
pub mod error;
pub mod instance;
pub mod lp;
pub mod matching;
pub mod parallel;
pub mod pipeline;
pub mod preprocess;
pub mod validate;

pub use classify::{classify, EdgeClass, PreprocessedInstance, TypeKind};
pub use error::{Error, Result};
pub use instance::{EdgeSpec, Instance, OnlineType};
pub use matching::FractionalMatching;
pub use validate::{validate_instance, validate_matching, ValidationReport, Violation, ViolationKind};

/// Absolute tolerance for every equality and feasibility check.
pub const TOL: f64 = 1e-9;

/// Reserved id prefix for vertices and types introduced by preprocessing.
pub const DUMMY_PREFIX: &str = "~dummy/";

/// Right-hand side of the Jaillet-Lu constraint, `1 - ln 2`.
#[inline]
pub fn one_minus_ln2() -> f64 {
    1.0 - std::f64::consts::LN_2
}

/// `true` if `id` names an entity created by preprocessing.
#[inline]
pub fn is_dummy(id: &str) -> bool {
    id.starts_with(DUMMY_PREFIX)
}
