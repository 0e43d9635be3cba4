//! Numerical tools for the metric-restricted inverse design equation
//!
//! ```text
//! (∇ξ)ᵀ G ∇ξ = G̃        on Ω ⊂ ℝⁿ, n ∈ {2, 3}
//! ```
//!
//! where `G` and `G̃` are symmetric positive definite matrix fields given as
//! closed-form expressions in the coordinates `x1 … xn`. The crate decides,
//! diagnoses and (where possible) constructs solutions `ξ`:
//!
//! * [`expr`] parses metric entries and evaluates them with exact first and
//!   second derivatives ([`Jet2`]).
//! * [`geometry`] builds Christoffel symbols, the Riemann tensor, Gauss and
//!   Ricci curvature, and the conformal compatibility residuals.
//! * [`planar`] is the two-dimensional rotation-angle reduction: the `m`, `n`
//!   fields, their integrability residuals, lattice integration of the angle
//!   equation and reconstruction of `ξ`.
//! * [`tde`] is the general-dimension total differential system for the frame
//!   `w = ∇ξ`: right-hand sides, integrability residuals, sampled integrability
//!   checks, path integration and the pointwise algebraic cost.
//! * [`energy`] is the discrete incompatibility energy and its minimization.
//! * [`dimred`] holds the thin-film limit: Cosserat vector, plate quadratic
//!   forms, limit functional and recovery-sequence energies.
//!
//! All numerics are generic over the scalar type through [`Real`] (implemented
//! for `f32` and `f64`); the aliases at the bottom of this file fix `f64`,
//! which is what the tolerances in [`tol`] are calibrated for.

pub mod dimred;
pub mod energy;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod optim;
pub mod planar;
pub mod tde;
pub mod tol;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};
pub use expr::{Expression, Jet1, Jet2};
pub use geometry::MetricField;
pub use grid::{GridDomain, GridFunction};

/// Floating point scalar used throughout the crate.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + Sum + 'static {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for reports and error payloads.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Copies a point into an `f64` vector for diagnostics.
pub(crate) fn point_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64_lossy()).collect()
}

/// Double-precision aliases.
pub type Jet2d<const N: usize> = Jet2<f64, N>;
pub type MetricJet2d = geometry::MetricJet<f64, 2>;
pub type MetricJet3d = geometry::MetricJet<f64, 3>;
pub type ChristoffelJet2d = geometry::ChristoffelJet<f64, 2>;
pub type ChristoffelJet3d = geometry::ChristoffelJet<f64, 3>;
pub type Grid2d = GridDomain<f64, 2>;
pub type Grid3d = GridDomain<f64, 3>;
pub type FrameState2d = tde::FrameState<f64, 2>;
pub type FrameState3d = tde::FrameState<f64, 3>;
pub type ThetaSolution2d = planar::ThetaSolution<f64>;
pub type DeformationField2d = energy::DeformationField<f64, 2>;
pub type DeformationField3d = energy::DeformationField<f64, 3>;
pub type LameParams64 = dimred::LameParams<f64>;
pub type Midplate64 = dimred::Midplate<f64>;
