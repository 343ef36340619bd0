//! Euler-Lagrange model layer: `D(q) q̈ + C(q, q̇) q̇ + G(q) = B(q) u`.
//!
//! Concrete models supply the inertia matrix, its configuration partials,
//! the gravity vector, and the input map; Coriolis terms, forward dynamics,
//! and energies are assembled here from those pieces.

pub mod two_link;
pub mod vlip;

pub use two_link::{TwoLink, TwoLinkParams};
pub use vlip::{ThrustMode, Vlip, VlipParams};

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::state::GeneralizedState;
use crate::{lit, Real};

/// Inertia, bias, gravity, and input-map terms evaluated at one state.
#[derive(Debug, Clone)]
pub struct DynamicsTerms<T: Real> {
    /// Symmetric inertia matrix `D(q)`.
    pub d: DMatrix<T>,
    /// Bias vector `H(q, q̇) = C(q, q̇) q̇ + G(q)`.
    pub h: DVector<T>,
    /// Gravity vector `G(q)`.
    pub g: DVector<T>,
    /// Input map `B(q)`.
    pub b: DMatrix<T>,
}

/// Ground reaction force at the stance contact point, world frame, newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundReaction<T: Real> {
    pub fx: T,
    pub fy: T,
    pub fz: T,
}

/// A mechanical model in Euler-Lagrange form.
pub trait Model<T: Real> {
    fn dof(&self) -> usize;

    fn input_dim(&self) -> usize;

    /// Coordinate names, used in error messages and log headers.
    fn coordinate_names(&self) -> Vec<String>;

    /// Input channel names, in column order of the control matrix.
    fn input_names(&self) -> Vec<String>;

    /// Index of the unactuated coordinate for models with one degree of
    /// underactuation; `None` for fully actuated models.
    fn unactuated_index(&self) -> Option<usize>;

    /// Symmetric inertia matrix `D(q)`.
    fn mass_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>>;

    /// Partial derivatives `∂D/∂q_k` for `k = 0..n`.
    fn mass_matrix_partials(&self, q: &DVector<T>) -> Result<Vec<DMatrix<T>>>;

    /// Gravity vector `G(q) = ∂V/∂q`.
    fn gravity_vector(&self, q: &DVector<T>) -> Result<DVector<T>>;

    /// Input map `B(q)` from input channels to generalized forces.
    fn control_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>>;

    /// Potential energy `V(q)`.
    fn potential_energy(&self, q: &DVector<T>) -> Result<T>;

    /// Check a state against the model's validity region.
    fn validate_state(&self, state: &GeneralizedState<T>) -> Result<()>;

    /// Ground reaction force from a consistent `(state, q̈)` pair, for
    /// models with a stance contact.
    fn ground_reaction(
        &self,
        _state: &GeneralizedState<T>,
        _qddot: &DVector<T>,
    ) -> Option<GroundReaction<T>> {
        None
    }
}

pub(crate) fn require_finite_vector<T: Real>(v: &DVector<T>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CoreError::InvalidState(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// Christoffel matrices `Q_i` with
/// `Q_i[j][k] = (∂D_ij/∂q_k + ∂D_ik/∂q_j − ∂D_jk/∂q_i) / 2`.
///
/// Each `Q_i` is symmetric; the Coriolis force on coordinate `i` is
/// `q̇ᵀ Q_i q̇`.
pub fn christoffel<T: Real, M: Model<T>>(model: &M, q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
    require_finite_vector(q, "configuration")?;
    let n = model.dof();
    let partials = model.mass_matrix_partials(q)?;
    let half = lit::<T>(0.5);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut qi = DMatrix::<T>::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                qi[(j, k)] =
                    (partials[k][(i, j)] + partials[j][(i, k)] - partials[i][(j, k)]) * half;
            }
        }
        out.push(qi);
    }
    Ok(out)
}

/// Coriolis matrix `C(q, q̇)` with rows `(Q_i q̇)ᵀ`, so `C q̇` stacks the
/// quadratic velocity forces and `Ḋ − 2C` is skew-symmetric.
pub fn coriolis_matrix<T: Real, M: Model<T>>(
    model: &M,
    q: &DVector<T>,
    qdot: &DVector<T>,
) -> Result<DMatrix<T>> {
    let n = model.dof();
    let qmats = christoffel(model, q)?;
    let mut c = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        let row = (&qmats[i] * qdot).transpose();
        c.set_row(i, &row);
    }
    Ok(c)
}

/// Bias vector `H(q, q̇) = C(q, q̇) q̇ + G(q)`.
pub fn bias_vector<T: Real, M: Model<T>>(
    model: &M,
    q: &DVector<T>,
    qdot: &DVector<T>,
) -> Result<DVector<T>> {
    require_finite_vector(qdot, "velocity")?;
    let c = coriolis_matrix(model, q, qdot)?;
    let g = model.gravity_vector(q)?;
    Ok(c * qdot + g)
}

/// All dynamics terms at one state.
pub fn dynamics_terms<T: Real, M: Model<T>>(
    model: &M,
    state: &GeneralizedState<T>,
) -> Result<DynamicsTerms<T>> {
    state.require_finite()?;
    Ok(DynamicsTerms {
        d: model.mass_matrix(&state.q)?,
        h: bias_vector(model, &state.q, &state.qdot)?,
        g: model.gravity_vector(&state.q)?,
        b: model.control_matrix(&state.q)?,
    })
}

/// Generalized acceleration `q̈ = D⁻¹ (−H + B u)`.
///
/// Fails with a singular-configuration error naming the coordinate whose
/// inertia has collapsed when `D` cannot be factored.
pub fn forward_dynamics<T: Real, M: Model<T>>(
    model: &M,
    state: &GeneralizedState<T>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    let terms = dynamics_terms(model, state)?;
    if u.len() != terms.b.ncols() {
        return Err(CoreError::Config(format!(
            "input has {} channels, control matrix expects {}",
            u.len(),
            terms.b.ncols()
        )));
    }
    let rhs = &terms.b * u - &terms.h;
    solve_spd(model, &terms.d, &rhs)
}

/// Solve `D x = rhs` for the symmetric positive-definite inertia matrix.
pub(crate) fn solve_spd<T: Real, M: Model<T>>(
    model: &M,
    d: &DMatrix<T>,
    rhs: &DVector<T>,
) -> Result<DVector<T>> {
    match d.clone().cholesky() {
        Some(chol) => Ok(chol.solve(rhs)),
        None => {
            // The coordinate with the smallest inertia diagonal is the one
            // whose direction lost rank.
            let names = model.coordinate_names();
            let mut worst = 0;
            for i in 1..d.nrows() {
                if d[(i, i)].abs() < d[(worst, worst)].abs() {
                    worst = i;
                }
            }
            Err(CoreError::SingularConfiguration {
                coordinate: names.get(worst).cloned().unwrap_or_else(|| worst.to_string()),
                detail: "inertia matrix is not positive definite here".into(),
            })
        }
    }
}

/// Kinetic energy `q̇ᵀ D q̇ / 2`.
pub fn kinetic_energy<T: Real, M: Model<T>>(
    model: &M,
    state: &GeneralizedState<T>,
) -> Result<T> {
    let d = model.mass_matrix(&state.q)?;
    Ok(state.qdot.dot(&(&d * &state.qdot)) * lit::<T>(0.5))
}

/// Total mechanical energy `T + V`.
pub fn total_energy<T: Real, M: Model<T>>(model: &M, state: &GeneralizedState<T>) -> Result<T> {
    Ok(kinetic_energy(model, state)? + model.potential_energy(&state.q)?)
}
