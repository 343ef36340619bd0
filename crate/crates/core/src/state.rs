//! Generalized state of a mechanical model.

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::Real;

/// Configuration vector `q` and velocity vector `q̇` of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedState<T: Real> {
    pub q: DVector<T>,
    pub qdot: DVector<T>,
}

impl<T: Real> GeneralizedState<T> {
    /// Panics if the two vectors have different lengths.
    pub fn new(q: DVector<T>, qdot: DVector<T>) -> Self {
        assert_eq!(q.len(), qdot.len(), "q and qdot must have equal length");
        Self { q, qdot }
    }

    pub fn from_slices(q: &[T], qdot: &[T]) -> Self {
        Self::new(DVector::from_row_slice(q), DVector::from_row_slice(qdot))
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }

    pub(crate) fn require_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(CoreError::InvalidState(
                "state contains non-finite entries".into(),
            ))
        }
    }
}
