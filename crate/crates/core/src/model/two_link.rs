//! Planar two-link chain with one actuator, the minimal fixture with one
//! degree of underactuation.
//!
//! Coordinates are `q = [q1, q2]`: the shoulder angle from straight down and
//! the relative elbow angle. The elbow carries the only actuator, so the
//! shoulder coordinate is the unactuated one and `B = [0, 1]ᵀ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::model::{require_finite_vector, Model};
use crate::state::GeneralizedState;
use crate::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLinkParams<T: Real> {
    pub m1: T,
    pub m2: T,
    /// Link lengths.
    pub l1: T,
    pub l2: T,
    /// Distances from each joint to its link's point mass.
    pub lc1: T,
    pub lc2: T,
    pub gravity: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLink<T: Real> {
    pub params: TwoLinkParams<T>,
}

impl<T: Real> TwoLink<T> {
    pub fn new(params: TwoLinkParams<T>) -> Result<Self> {
        let positive = [
            params.m1, params.m2, params.l1, params.l2, params.lc1, params.lc2, params.gravity,
        ];
        if positive.iter().any(|p| !(*p > T::zero())) {
            return Err(CoreError::Config(
                "two-link masses, lengths, and gravity must be positive".into(),
            ));
        }
        Ok(Self { params })
    }

    /// Unit masses at the link midpoints, 0.5 m links, standard gravity.
    pub fn fixture() -> Self {
        Self {
            params: TwoLinkParams {
                m1: T::one(),
                m2: T::one(),
                l1: lit(0.5),
                l2: lit(0.5),
                lc1: lit(0.25),
                lc2: lit(0.25),
                gravity: lit(9.81),
            },
        }
    }
}

impl<T: Real> Model<T> for TwoLink<T> {
    fn dof(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn coordinate_names(&self) -> Vec<String> {
        vec!["q1".into(), "q2".into()]
    }

    fn input_names(&self) -> Vec<String> {
        vec!["tau2".into()]
    }

    fn unactuated_index(&self) -> Option<usize> {
        Some(0)
    }

    fn mass_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        require_finite_vector(q, "configuration")?;
        let p = &self.params;
        let c2 = q[1].cos();
        let two = lit::<T>(2.0);
        let d11 = p.m1 * p.lc1 * p.lc1
            + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + two * p.l1 * p.lc2 * c2);
        let d12 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * c2);
        let d22 = p.m2 * p.lc2 * p.lc2;
        Ok(DMatrix::from_row_slice(2, 2, &[d11, d12, d12, d22]))
    }

    fn mass_matrix_partials(&self, q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
        require_finite_vector(q, "configuration")?;
        let p = &self.params;
        let s2 = q[1].sin();
        let two = lit::<T>(2.0);
        let d11 = -two * p.m2 * p.l1 * p.lc2 * s2;
        let d12 = -p.m2 * p.l1 * p.lc2 * s2;
        let by_q1 = DMatrix::zeros(2, 2);
        let by_q2 = DMatrix::from_row_slice(2, 2, &[d11, d12, d12, T::zero()]);
        Ok(vec![by_q1, by_q2])
    }

    fn gravity_vector(&self, q: &DVector<T>) -> Result<DVector<T>> {
        require_finite_vector(q, "configuration")?;
        let p = &self.params;
        let s1 = q[0].sin();
        let s12 = (q[0] + q[1]).sin();
        let g1 = (p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity * s1 + p.m2 * p.lc2 * p.gravity * s12;
        let g2 = p.m2 * p.lc2 * p.gravity * s12;
        Ok(DVector::from_row_slice(&[g1, g2]))
    }

    fn control_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        require_finite_vector(q, "configuration")?;
        Ok(DMatrix::from_row_slice(2, 1, &[T::zero(), T::one()]))
    }

    fn potential_energy(&self, q: &DVector<T>) -> Result<T> {
        require_finite_vector(q, "configuration")?;
        let p = &self.params;
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        Ok(-(p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity * c1 - p.m2 * p.lc2 * p.gravity * c12)
    }

    fn validate_state(&self, state: &GeneralizedState<T>) -> Result<()> {
        state.require_finite()?;
        if state.dof() != 2 {
            return Err(CoreError::Config(format!(
                "two-link state needs 2 coordinates, got {}",
                state.dof()
            )));
        }
        Ok(())
    }
}
