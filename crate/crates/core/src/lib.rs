//! Reduced-order legged-locomotion templates with constraint-aware
//! reference priming.
//!
//! The crate bundles three layers:
//!
//! * [`model`]: Euler-Lagrange rigid-body terms (inertia, bias, gravity,
//!   input map) for a 3D variable-length inverted pendulum and a planar
//!   two-link chain, plus forward dynamics and contact-force recovery.
//! * [`path`], [`vc`], [`control`]: Bezier tracking references, the
//!   virtual-constraint outputs they induce, the reduced dynamics on the
//!   constraint manifold, and a feedback-linearizing PD tracking law whose
//!   equilibrium can be shifted by a primer vector.
//! * [`governor`], [`sim`]: an optimization-free governor that steers the
//!   primer so predicted steady states stay inside the constraint-admissible
//!   set, and a fixed-step RK4 engine that integrates plant, controller, and
//!   primer together.
//!
//! All numerics are generic over the scalar type through [`Real`]; the
//! aliases at the crate root fix `f64` for the common cases.

pub mod bezier;
pub mod control;
pub mod error;
pub mod governor;
pub mod model;
pub mod path;
pub mod sim;
pub mod state;
pub mod vc;

pub use error::{CoreError, Result};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type accepted by every numeric routine in the crate: `f32`, `f64`,
/// or any other real field with primitive conversions.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T: RealField + FromPrimitive + ToPrimitive + Copy> Real for T {}

/// Lift an `f64` literal into the working scalar type.
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal must be representable in the scalar type")
}

/// Variable-length inverted pendulum over `f64`.
pub type Vlip64 = model::Vlip<f64>;
/// Variable-length inverted pendulum over `f32`.
pub type Vlip32 = model::Vlip<f32>;
/// Planar two-link chain over `f64`.
pub type TwoLink64 = model::TwoLink<f64>;
/// Tracking reference over `f64`.
pub type ReferencePath64 = path::ReferencePath<f64>;
/// PD gain pair over `f64`.
pub type Gains64 = control::Gains<f64>;
/// Simulation trace over `f64`.
pub type Trace64 = sim::Trace<f64>;
