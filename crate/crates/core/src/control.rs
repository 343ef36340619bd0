//! Feedback-linearizing PD tracking with a primer-shifted equilibrium.
//!
//! The law inverts the output decoupling matrix and assigns linear error
//! dynamics to the tracked outputs. The primer enters by shifting the
//! equilibrium the PD terms regulate to: under a constant primer `ω` the
//! closed loop settles at `y = −Kp⁻¹ Kd ω`, `ẏ = −ω` instead of the origin.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::model::{dynamics_terms, Model};
use crate::path::{PathMode, ReferencePath};
use crate::state::GeneralizedState;
use crate::vc::{self, output_and_derivative};
use crate::{lit, Real};

/// Symmetric positive-definite PD gain pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains<T: Real> {
    kp: DMatrix<T>,
    kd: DMatrix<T>,
}

impl<T: Real> Gains<T> {
    pub fn new(kp: DMatrix<T>, kd: DMatrix<T>) -> Result<Self> {
        for (name, k) in [("kp", &kp), ("kd", &kd)] {
            if !k.is_square() || k.nrows() == 0 {
                return Err(CoreError::Config(format!("{name} must be square")));
            }
            let scale = T::one() + k.amax();
            let asym = (k - k.transpose()).amax();
            if asym > lit::<T>(1e-12) * scale {
                return Err(CoreError::Config(format!("{name} must be symmetric")));
            }
            if k.clone().cholesky().is_none() {
                return Err(CoreError::Config(format!(
                    "{name} must be positive definite"
                )));
            }
        }
        if kp.nrows() != kd.nrows() {
            return Err(CoreError::Config("kp and kd sizes differ".into()));
        }
        Ok(Self { kp, kd })
    }

    pub fn diagonal(kp: &[T], kd: &[T]) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_row_slice(kp)),
            DMatrix::from_diagonal(&DVector::from_row_slice(kd)),
        )
    }

    /// Scaled-identity gains on `rows` channels.
    pub fn uniform(rows: usize, kp: T, kd: T) -> Result<Self> {
        Self::new(
            DMatrix::identity(rows, rows) * kp,
            DMatrix::identity(rows, rows) * kd,
        )
    }

    pub fn rows(&self) -> usize {
        self.kp.nrows()
    }

    pub fn kp(&self) -> &DMatrix<T> {
        &self.kp
    }

    pub fn kd(&self) -> &DMatrix<T> {
        &self.kd
    }

    /// `Kp⁻¹ v`.
    pub fn solve_kp(&self, v: &DVector<T>) -> DVector<T> {
        self.kp
            .clone()
            .cholesky()
            .expect("kp validated positive definite")
            .solve(v)
    }
}

/// Drift and input map of the tracked-output acceleration, plus the primer
/// injection layout.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDynamicsTerms<T: Real> {
    /// Input-independent part of the output acceleration.
    pub gamma1: DVector<T>,
    /// Map from the input channels to the output acceleration.
    pub gamma2: DMatrix<T>,
    /// Primer injection layout into the stacked `(y, ẏ)` dynamics: identity
    /// into the rate block, zero into the position block.
    pub b_omega: DMatrix<T>,
}

/// Assemble the output-acceleration terms `ÿ = γ₁ + γ₂ u` at one state.
///
/// `γ₂ = J D⁻¹ B` and `γ₁ = −J D⁻¹ H − r″ ν²`, with `J` the output Jacobian
/// (the selector, minus the reference slope on the unactuated column for
/// state-based paths) and `ν` the native-parameter rate. `γ₂` loses rank
/// exactly where the transversality scalar vanishes.
pub fn decoupling_and_drift<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    state: &GeneralizedState<T>,
    t: T,
) -> Result<OutputDynamicsTerms<T>> {
    let terms = dynamics_terms(model, state)?;
    let param = vc::native_param(model, path, state, t)?;
    let nu = vc::native_rate(model, path, state)?;
    let eval = path.eval(param);

    let mut jac = path.selector().clone();
    if let PathMode::State { .. } = path.mode() {
        let iu = vc::state_mode_unactuated(model, path)?;
        for row in 0..jac.nrows() {
            jac[(row, iu)] -= eval.dr[row];
        }
    }

    let chol = terms.d.clone().cholesky().ok_or_else(|| {
        CoreError::SingularDecoupling("inertia matrix not factorable".into())
    })?;
    let dinv_b = chol.solve(&terms.b);
    let dinv_h = chol.solve(&terms.h);

    let gamma2 = &jac * dinv_b;
    let gamma1 = -(&jac * dinv_h) - &eval.ddr * (nu * nu);

    let rows = path.rows();
    if gamma2.is_square() {
        let det = gamma2.determinant();
        if !det.is_finite() || det.abs() < lit::<T>(1e-14) * (T::one() + gamma2.amax()) {
            return Err(CoreError::SingularDecoupling(format!(
                "determinant {:e} too small",
                det.to_f64().unwrap_or(f64::NAN)
            )));
        }
    } else if gamma2.clone().svd(false, false).rank(lit(1e-12)) < rows {
        return Err(CoreError::SingularDecoupling(
            "input map does not span the outputs".into(),
        ));
    }

    let mut b_omega = DMatrix::zeros(2 * rows, rows);
    b_omega.view_mut((0, 0), (rows, rows)).fill_diagonal(T::one());

    Ok(OutputDynamicsTerms {
        gamma1,
        gamma2,
        b_omega,
    })
}

/// Closed-loop equilibrium of the tracked outputs under a constant primer:
/// `y_ω = −Kp⁻¹ Kd ω`, `ẏ_ω = −ω`.
pub fn steady_state_output<T: Real>(
    gains: &Gains<T>,
    omega: &DVector<T>,
) -> (DVector<T>, DVector<T>) {
    let y = -gains.solve_kp(&(gains.kd() * omega));
    (y, -omega)
}

/// Membership residual of the steady-state locus: `y − Kp⁻¹ Kd ẏ`, zero
/// exactly when `(y, ẏ)` is the equilibrium for some primer value.
pub fn steady_state_residual<T: Real>(
    gains: &Gains<T>,
    y: &DVector<T>,
    ydot: &DVector<T>,
) -> DVector<T> {
    y - gains.solve_kp(&(gains.kd() * ydot))
}

/// Tracking input `u = −γ₂⁻¹ (γ₁ + Kp e + Kd ė)` with `(e, ė)` the output
/// errors to the primer-shifted equilibrium.
///
/// For models with more input channels than outputs the minimum-norm input
/// is returned. Inputs are never clipped here; bound monitoring happens in
/// the simulation loop.
pub fn fbl_control<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    state: &GeneralizedState<T>,
    t: T,
    omega: &DVector<T>,
    gains: &Gains<T>,
) -> Result<DVector<T>> {
    if gains.rows() != path.rows() {
        return Err(CoreError::Config(format!(
            "gains act on {} channels for {} outputs",
            gains.rows(),
            path.rows()
        )));
    }
    let out = output_and_derivative(model, path, state, t, omega)?;
    let (y_eq, ydot_eq) = steady_state_output(gains, omega);
    let e = &out.y - y_eq;
    let edot = &out.ydot - ydot_eq;
    let terms = decoupling_and_drift(model, path, state, t)?;
    let rhs = -(terms.gamma1 + gains.kp() * e + gains.kd() * edot);
    if terms.gamma2.is_square() {
        terms
            .gamma2
            .lu()
            .solve(&rhs)
            .ok_or_else(|| CoreError::SingularDecoupling("lu solve failed".into()))
    } else {
        terms
            .gamma2
            .svd(true, true)
            .solve(&rhs, lit(1e-12))
            .map_err(|e| CoreError::SingularDecoupling(e.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_primer_has_undeformed_equilibrium() {
        let gains = Gains::uniform(3, 100.0, 20.0).unwrap();
        let (y, ydot) = steady_state_output(&gains, &DVector::zeros(3));
        assert_relative_eq!(y.norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(ydot.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scalar_channel_equilibrium_values() {
        let gains = Gains::uniform(1, 100.0, 20.0).unwrap();
        let (y, ydot) = steady_state_output(&gains, &DVector::from_row_slice(&[0.1]));
        assert_relative_eq!(y[0], -0.02, max_relative = 1e-13);
        assert_relative_eq!(ydot[0], -0.1, max_relative = 1e-13);
    }

    #[test]
    fn equilibrium_points_sit_on_the_locus() {
        let gains = Gains::diagonal(&[80.0, 120.0], &[18.0, 30.0]).unwrap();
        for seed in 1..40 {
            let w = DVector::from_fn(2, |i, _| ((seed * (i + 3)) as f64 * 0.217).sin());
            let (y, ydot) = steady_state_output(&gains, &w);
            let res = steady_state_residual(&gains, &y, &ydot);
            assert!(res.amax() < 1e-12, "residual {} for seed {seed}", res.amax());
        }
    }

    #[test]
    fn off_locus_point_has_unit_residual() {
        let gains = Gains::uniform(1, 100.0, 20.0).unwrap();
        let res = steady_state_residual(
            &gains,
            &DVector::from_row_slice(&[1.0]),
            &DVector::from_row_slice(&[0.0]),
        );
        assert_relative_eq!(res[0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn gains_must_be_symmetric_positive_definite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(Gains::new(asym, DMatrix::identity(2, 2)).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(Gains::new(indefinite, DMatrix::identity(2, 2)).is_err());
        assert!(Gains::uniform(2, 100.0, 20.0).is_ok());
    }
}
