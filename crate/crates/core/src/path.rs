//! Tracking references: per-output Bezier curves with a time- or
//! state-based parameterization.

use nalgebra::{DMatrix, DVector};

use crate::bezier;
use crate::error::{CoreError, Result};
use crate::{lit, Real};

/// How the curve parameter `s ∈ [0, 1]` is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathMode<T: Real> {
    /// `s = (t mod period) / period`. Periodic paths must close,
    /// `r(0) = r(1)`.
    Time { period: T, periodic: bool },
    /// `s = (q_n − lo) / (hi − lo)`, clamped to `[0, 1]`, where `q_n` is the
    /// unactuated coordinate.
    State { lo: T, hi: T },
}

/// Reference value and its first two derivatives with respect to the native
/// parameter (time in `Time` mode, `q_n` in `State` mode).
#[derive(Debug, Clone, PartialEq)]
pub struct RefEval<T: Real> {
    pub r: DVector<T>,
    pub dr: DVector<T>,
    pub ddr: DVector<T>,
}

/// A stack of Bezier curves, one per tracked output, together with the
/// selector matrix that picks the tracked coordinates out of `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath<T: Real> {
    coeffs: DMatrix<T>,
    mode: PathMode<T>,
    selector: DMatrix<T>,
    picked: Vec<usize>,
}

impl<T: Real> ReferencePath<T> {
    /// `coeffs` holds one row of `degree + 1` control values per output;
    /// `selector` must pick distinct coordinates (one standard basis row per
    /// output).
    pub fn new(coeffs: DMatrix<T>, mode: PathMode<T>, selector: DMatrix<T>) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.ncols() < 2 {
            return Err(CoreError::Config(
                "reference needs at least one output row of degree >= 1".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::Config(
                "reference coefficients must be finite".into(),
            ));
        }
        if selector.nrows() != coeffs.nrows() {
            return Err(CoreError::Config(format!(
                "selector has {} rows for {} reference outputs",
                selector.nrows(),
                coeffs.nrows()
            )));
        }
        let picked = picked_coordinates(&selector)?;
        match mode {
            PathMode::Time { period, periodic } => {
                if !(period > T::zero()) {
                    return Err(CoreError::Config("period must be positive".into()));
                }
                if periodic {
                    // Bezier endpoints equal the terminal control values.
                    for row in 0..coeffs.nrows() {
                        let gap = (coeffs[(row, 0)] - coeffs[(row, coeffs.ncols() - 1)]).abs();
                        if gap > lit(1e-9) {
                            return Err(CoreError::Config(format!(
                                "periodic reference row {row} does not close: |r(0) - r(1)| = {}",
                                gap.to_f64().unwrap_or(f64::NAN)
                            )));
                        }
                    }
                }
            }
            PathMode::State { lo, hi } => {
                if !(hi > lo) {
                    return Err(CoreError::Config(
                        "state-based range needs hi > lo".into(),
                    ));
                }
            }
        }
        Ok(Self {
            coeffs,
            mode,
            selector,
            picked,
        })
    }

    pub fn rows(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.ncols() - 1
    }

    pub fn mode(&self) -> PathMode<T> {
        self.mode
    }

    pub fn selector(&self) -> &DMatrix<T> {
        &self.selector
    }

    /// Coordinate indices picked by the selector, in output order.
    pub fn picked(&self) -> &[usize] {
        &self.picked
    }

    pub fn is_time_based(&self) -> bool {
        matches!(self.mode, PathMode::Time { .. })
    }

    pub fn state_range(&self) -> Option<(T, T)> {
        match self.mode {
            PathMode::State { lo, hi } => Some((lo, hi)),
            PathMode::Time { .. } => None,
        }
    }

    pub fn period(&self) -> Option<T> {
        match self.mode {
            PathMode::Time { period, .. } => Some(period),
            PathMode::State { .. } => None,
        }
    }

    /// Largest per-row closure gap `|r(0) − r(1)|`.
    pub fn closure_residual(&self) -> T {
        let mut worst = T::zero();
        for row in 0..self.coeffs.nrows() {
            let gap = (self.coeffs[(row, 0)] - self.coeffs[(row, self.coeffs.ncols() - 1)]).abs();
            worst = worst.max(gap);
        }
        worst
    }

    fn normalize(&self, param: T) -> (T, T) {
        match self.mode {
            PathMode::Time { period, .. } => {
                let wrapped = param - period * (param / period).floor();
                (wrapped / period, T::one() / period)
            }
            PathMode::State { lo, hi } => {
                let span = hi - lo;
                let s = ((param - lo) / span).clamp(T::zero(), T::one());
                (s, T::one() / span)
            }
        }
    }

    /// Reference value and derivatives at the native parameter (`t` or
    /// `q_n`), chain-rule rescaled from the unit curve parameter.
    pub fn eval(&self, param: T) -> RefEval<T> {
        let (s, scale) = self.normalize(param);
        let rows = self.rows();
        let mut r = DVector::zeros(rows);
        let mut dr = DVector::zeros(rows);
        let mut ddr = DVector::zeros(rows);
        for row in 0..rows {
            let coeffs: Vec<T> = self.coeffs.row(row).iter().copied().collect();
            let (v, dv, ddv) = bezier::eval_with_derivatives(&coeffs, s);
            r[row] = v;
            dr[row] = dv * scale;
            ddr[row] = ddv * scale * scale;
        }
        RefEval { r, dr, ddr }
    }
}

fn picked_coordinates<T: Real>(selector: &DMatrix<T>) -> Result<Vec<usize>> {
    let mut picked = Vec::with_capacity(selector.nrows());
    for row in 0..selector.nrows() {
        let mut hit = None;
        for col in 0..selector.ncols() {
            let v = selector[(row, col)];
            if v == T::one() {
                if hit.is_some() {
                    return Err(CoreError::Config(format!(
                        "selector row {row} picks more than one coordinate"
                    )));
                }
                hit = Some(col);
            } else if v != T::zero() {
                return Err(CoreError::Config(format!(
                    "selector row {row} must contain only zeros and a single one"
                )));
            }
        }
        let col = hit.ok_or_else(|| {
            CoreError::Config(format!("selector row {row} picks no coordinate"))
        })?;
        if picked.contains(&col) {
            return Err(CoreError::Config(format!(
                "selector picks coordinate {col} twice"
            )));
        }
        picked.push(col);
    }
    Ok(picked)
}
