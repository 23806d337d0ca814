//! Well-posedness certification for KKT systems of composite problems
//! `min h(x) + g(F(x))` with `g` drawn from a catalog of conic indicators and
//! matrix norms.
//!
//! The crate evaluates pointwise second-order conditions (nondegeneracy, SOQC,
//! SOSC, SSOSC, generalized-Jacobian nonsingularity), solves the KKT residual
//! equation with a semismooth Newton method, and probes the Aubin property,
//! isolated calmness, strong regularity and tilt stability empirically.
//!
//! All numerical code is generic over a [`Real`] scalar; the `*64` aliases at
//! the crate root fix it to `f64`, which is what the tolerances are tuned for.

pub mod catalog;
pub mod conditions;
pub mod encoding;
mod error;
pub mod linalg;
pub mod model;
pub mod probe;
pub mod second_order;
pub mod solver;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use catalog::{CatalogFunction, CatalogKind, ConeDescription, Resolution, SpectralThresholds};
pub use conditions::{Certificate, ConditionStatus, ConditionVerdict, ConditionsConfig};
pub use probe::{ProbeConfig, ProbeKind, ProbeResult, ProbeVerdict};
pub use error::{Error, Result};
pub use model::{
    AffineMap, Perturbation, PrimalDualPair, ProblemSpec, ProblemSpecInput, QuadraticObjective,
    SmoothFunction, SmoothMap,
};
pub use solver::{SolveTrace, SolverParams};

/// Scalar type accepted by every routine in the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("scalar type cannot represent f64 literal")
}

#[inline]
pub(crate) fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Problem64 = ProblemSpec<f64>;
pub type Problem32 = ProblemSpec<f32>;
pub type Catalog64 = CatalogFunction<f64>;
pub type Certificate64 = Certificate<f64>;
pub type Pair64 = PrimalDualPair<f64>;
pub type Perturbation64 = Perturbation<f64>;
pub type ProbeResult64 = ProbeResult<f64>;
pub type Trace64 = SolveTrace<f64>;
