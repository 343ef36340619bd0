//! Virtual-constraint outputs and the reduced dynamics they induce.
//!
//! The tracked output is `y = H q − r(·)`. On the manifold where the outputs
//! and their rates vanish, the unactuated coordinate obeys a one-dimensional
//! restriction ODE whose leading coefficient is the transversality scalar;
//! when that scalar vanishes the manifold stops being stabilizable.

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::model::{christoffel, Model};
use crate::path::{PathMode, ReferencePath};
use crate::state::GeneralizedState;
use crate::{lit, Real};

/// Default tolerance below which the transversality scalar counts as
/// vanishing, in the units of inertia-matrix entries.
pub const TRANSVERSALITY_TOL: f64 = 1e-6;

/// Tracked outputs and their rates at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputEval<T: Real> {
    pub y: DVector<T>,
    pub ydot: DVector<T>,
}

/// Native path parameter for a state/time pair: `t` in time mode, the
/// unactuated coordinate in state mode.
pub fn native_param<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    state: &GeneralizedState<T>,
    t: T,
) -> Result<T> {
    match path.mode() {
        PathMode::Time { .. } => Ok(t),
        PathMode::State { .. } => {
            let iu = state_mode_unactuated(model, path)?;
            Ok(state.q[iu])
        }
    }
}

/// Rate of the native parameter: 1 in time mode, `q̇_n` in state mode.
pub fn native_rate<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    state: &GeneralizedState<T>,
) -> Result<T> {
    match path.mode() {
        PathMode::Time { .. } => Ok(T::one()),
        PathMode::State { .. } => {
            let iu = state_mode_unactuated(model, path)?;
            Ok(state.qdot[iu])
        }
    }
}

pub(crate) fn state_mode_unactuated<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
) -> Result<usize> {
    let iu = model.unactuated_index().ok_or_else(|| {
        CoreError::Config("state-based path needs a model with an unactuated coordinate".into())
    })?;
    if path.picked().contains(&iu) {
        return Err(CoreError::Config(
            "reference selector must not pick the unactuated coordinate".into(),
        ));
    }
    Ok(iu)
}

/// Output error `y = H q − r` and its rate `ẏ = H q̇ − r′ ν − ω`, where `ν`
/// is the native-parameter rate and `ω` the primer value.
///
/// `y` measures the distance to the target reference. The rate is measured
/// against the primer-shifted velocity reference, so under the tracking law
/// a constant primer moves the closed-loop equilibrium of `(y, ẏ)` onto the
/// deformed manifold instead of the origin.
pub fn output_and_derivative<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    state: &GeneralizedState<T>,
    t: T,
    omega: &DVector<T>,
) -> Result<OutputEval<T>> {
    state.require_finite()?;
    if omega.len() != path.rows() {
        return Err(CoreError::Config(format!(
            "primer has {} channels for {} outputs",
            omega.len(),
            path.rows()
        )));
    }
    let param = native_param(model, path, state, t)?;
    let nu = native_rate(model, path, state)?;
    let eval = path.eval(param);
    let y = path.selector() * &state.q - &eval.r;
    let ydot = path.selector() * &state.qdot - &eval.dr * nu - omega;
    Ok(OutputEval { y, ydot })
}

/// Configuration on the constraint manifold at `q_n`: picked coordinates on
/// the reference, the unactuated coordinate at `q_n`.
pub fn manifold_configuration<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    q_n: T,
) -> Result<DVector<T>> {
    let iu = state_mode_unactuated(model, path)?;
    let eval = path.eval(q_n);
    let mut q = DVector::zeros(model.dof());
    for (row, &coord) in path.picked().iter().enumerate() {
        q[coord] = eval.r[row];
    }
    q[iu] = q_n;
    Ok(q)
}

/// Tangent and curvature of the manifold in configuration space:
/// `t = dq/dq_n` (one at the unactuated coordinate, `r′` elsewhere) and
/// `s = d²q/dq_n²`.
fn manifold_tangent<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    q_n: T,
) -> Result<(DVector<T>, DVector<T>, usize)> {
    let iu = state_mode_unactuated(model, path)?;
    let eval = path.eval(q_n);
    let n = model.dof();
    let mut tangent = DVector::zeros(n);
    let mut curvature = DVector::zeros(n);
    tangent[iu] = T::one();
    for (row, &coord) in path.picked().iter().enumerate() {
        tangent[coord] = eval.dr[row];
        curvature[coord] = eval.ddr[row];
    }
    Ok((tangent, curvature, iu))
}

/// Transversality scalar: the unactuated row of `D(q)` contracted with the
/// manifold tangent. The manifold is stabilizable where this stays away
/// from zero; callers should treat magnitudes below
/// [`TRANSVERSALITY_TOL`] as failures.
pub fn transversality<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    q_n: T,
) -> Result<T> {
    if path.is_time_based() {
        return Err(CoreError::UnsupportedMode(
            "transversality needs a state-based path".into(),
        ));
    }
    let q = manifold_configuration(model, path, q_n)?;
    let d = model.mass_matrix(&q)?;
    let (tangent, _, iu) = manifold_tangent(model, path, q_n)?;
    Ok((d * tangent)[iu])
}

/// Acceleration of the unactuated coordinate on the constraint manifold:
/// `q̈_n = −(β₁ q̇_n² + β₂) / α` with `α` the transversality scalar,
/// `β₁` assembled from the inertia curvature term and the unactuated
/// Christoffel matrix, and `β₂` the unactuated gravity component.
pub fn restriction_dynamics<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    q_n: T,
    qdot_n: T,
) -> Result<T> {
    if path.is_time_based() {
        return Err(CoreError::UnsupportedMode(
            "restriction dynamics need a state-based path".into(),
        ));
    }
    let q = manifold_configuration(model, path, q_n)?;
    let d = model.mass_matrix(&q)?;
    let (tangent, curvature, iu) = manifold_tangent(model, path, q_n)?;
    let alpha = (&d * &tangent)[iu];
    let tol = lit::<T>(TRANSVERSALITY_TOL);
    if alpha.abs() < tol {
        return Err(CoreError::VanishingTransversality {
            value: alpha.to_f64().unwrap_or(f64::NAN),
            location: q_n.to_f64().unwrap_or(f64::NAN),
            tol: TRANSVERSALITY_TOL,
        });
    }
    let qmats = christoffel(model, &q)?;
    let beta1 = (&d * &curvature)[iu] + tangent.dot(&(&qmats[iu] * &tangent));
    let beta2 = model.gravity_vector(&q)?[iu];
    Ok(-(beta1 * qdot_n * qdot_n + beta2) / alpha)
}
