//! Optimization-free constraint governor.
//!
//! The governor never solves a program: it predicts the closed-loop steady
//! state for the current primer value, measures normalized constraint
//! margins there, and moves the primer along a navigation field built from
//! an attraction term (decay back to the unprimed reference while safe) and
//! a repulsion term (finite-difference margin gradients when a margin drops
//! below its activation band). Transient violations are tolerated; the field
//! pulls trajectories back into the admissible set.

use nalgebra::{DMatrix, DVector};

use crate::control::{fbl_control, steady_state_output, Gains};
use crate::error::{CoreError, Result};
use crate::model::{forward_dynamics, GroundReaction, Model};
use crate::path::{PathMode, ReferencePath};
use crate::state::GeneralizedState;
use crate::vc;
use crate::{lit, Real};

/// One scalar inequality, feasible when the evaluated value is at least zero.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind<T: Real> {
    /// `q[index] − min ≥ 0`.
    MinCoordinate { index: usize, min: T },
    /// `μ F_z − |F_x| ≥ 0`.
    FrictionConeX,
    /// `μ F_z − |F_y| ≥ 0`.
    FrictionConeY,
    /// `F_z − min ≥ 0`.
    MinNormalForce { min: T },
    /// `wᵀ q + offset ≥ 0`; state boxes and synthetic diagnostics.
    StateAffine { weights: DVector<T>, offset: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T: Real> {
    pub name: String,
    pub kind: ConstraintKind<T>,
    /// Normalization scale; margins are reported as value / scale.
    pub scale: T,
    /// Activation band: repulsion turns on when the normalized margin drops
    /// below this value.
    pub activation: T,
}

/// The stacked inequality set evaluated by the governor and the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec<T: Real> {
    /// Friction coefficient used by the cone constraints.
    pub mu: T,
    pub constraints: Vec<Constraint<T>>,
    /// Optional input box bounds; each bound contributes one margin row.
    pub input_lower: Option<DVector<T>>,
    pub input_upper: Option<DVector<T>>,
    /// Normalization scale for the input box margins.
    pub input_scale: T,
    /// Activation band for the input box margins.
    pub input_activation: T,
}

impl<T: Real> ConstraintSpec<T> {
    /// No constraints at all; margins come back empty.
    pub fn empty() -> Self {
        Self {
            mu: lit(0.6),
            constraints: Vec::new(),
            input_lower: None,
            input_upper: None,
            input_scale: T::one(),
            input_activation: lit(0.1),
        }
    }

    /// The four stance constraints of the pendulum scenario: an inclination
    /// floor, both friction cone sides, and a normal-force floor.
    pub fn vlip_stance(mu: T, min_theta: T, min_fz: T) -> Self {
        let activation = lit(0.1);
        Self {
            mu,
            constraints: vec![
                Constraint {
                    name: "theta_min".into(),
                    kind: ConstraintKind::MinCoordinate {
                        index: 0,
                        min: min_theta,
                    },
                    scale: T::one(),
                    activation,
                },
                Constraint {
                    name: "friction_x".into(),
                    kind: ConstraintKind::FrictionConeX,
                    scale: T::one(),
                    activation,
                },
                Constraint {
                    name: "friction_y".into(),
                    kind: ConstraintKind::FrictionConeY,
                    scale: T::one(),
                    activation,
                },
                Constraint {
                    name: "fz_min".into(),
                    kind: ConstraintKind::MinNormalForce { min: min_fz },
                    scale: T::one(),
                    activation,
                },
            ],
            input_lower: None,
            input_upper: None,
            input_scale: T::one(),
            input_activation: activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero()) {
            return Err(CoreError::Config("mu must be positive".into()));
        }
        if !(self.input_scale > T::zero()) {
            return Err(CoreError::Config("input scale must be positive".into()));
        }
        for c in &self.constraints {
            if !(c.scale > T::zero()) {
                return Err(CoreError::Config(format!(
                    "constraint `{}` needs a positive scale",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Number of margin rows for a model with `input_dim` channels.
    pub fn margin_len(&self, input_dim: usize) -> usize {
        let mut len = self.constraints.len();
        if self.input_lower.is_some() {
            len += input_dim;
        }
        if self.input_upper.is_some() {
            len += input_dim;
        }
        len
    }

    /// Margin row names, aligned with [`constraint_margins`].
    pub fn margin_names(&self, input_names: &[String]) -> Vec<String> {
        let mut names: Vec<String> = self.constraints.iter().map(|c| c.name.clone()).collect();
        if self.input_lower.is_some() {
            names.extend(input_names.iter().map(|n| format!("{n}_lower")));
        }
        if self.input_upper.is_some() {
            names.extend(input_names.iter().map(|n| format!("{n}_upper")));
        }
        names
    }

    /// Activation bands aligned with the margin rows.
    pub fn activation_margins(&self, input_dim: usize) -> DVector<T> {
        let mut v = Vec::with_capacity(self.margin_len(input_dim));
        v.extend(self.constraints.iter().map(|c| c.activation));
        if self.input_lower.is_some() {
            v.extend(std::iter::repeat(self.input_activation).take(input_dim));
        }
        if self.input_upper.is_some() {
            v.extend(std::iter::repeat(self.input_activation).take(input_dim));
        }
        DVector::from_vec(v)
    }
}

/// Primer update-law parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimerParams<T: Real> {
    /// Attraction gain pulling the primer back to zero while safe.
    pub attraction: T,
    /// Repulsion gain on active margin gradients.
    pub repulsion: T,
    /// Per-channel bound on the primer rate.
    pub rate_limit: T,
    /// Central-difference step for margin gradients.
    pub fd_step: T,
}

impl<T: Real> Default for PrimerParams<T> {
    fn default() -> Self {
        Self {
            attraction: lit(5.0),
            repulsion: lit(2.0),
            rate_limit: lit(5.0),
            fd_step: lit(1e-4),
        }
    }
}

/// Primer vector, its running integral, and the update-law parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimerState<T: Real> {
    pub omega: DVector<T>,
    pub omega_integral: DVector<T>,
    pub params: PrimerParams<T>,
}

impl<T: Real> PrimerState<T> {
    pub fn zeroed(channels: usize, params: PrimerParams<T>) -> Self {
        Self {
            omega: DVector::zeros(channels),
            omega_integral: DVector::zeros(channels),
            params,
        }
    }
}

/// Steady state the closed loop would settle into if the primer and the
/// path parameter froze at their current values.
#[derive(Debug, Clone)]
pub struct SteadyStatePrediction<T: Real> {
    pub state: GeneralizedState<T>,
    pub input: DVector<T>,
    pub grf: Option<GroundReaction<T>>,
}

/// Predict the constant-primer steady state at the current path parameter.
///
/// The tracked coordinates sit on the reference offset by the equilibrium
/// output error; tracked velocities settle on the reference rate; unactuated
/// coordinates keep their current values. The input is the tracking law at
/// that state and the contact force follows from the resulting acceleration.
pub fn predict_steady_state<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    gains: &Gains<T>,
    omega: &DVector<T>,
    state: &GeneralizedState<T>,
    t: T,
) -> Result<SteadyStatePrediction<T>> {
    let param = vc::native_param(model, path, state, t)?;
    let nu = vc::native_rate(model, path, state)?;
    let eval = path.eval(param);
    let (y_eq, _) = steady_state_output(gains, omega);

    let mut q = state.q.clone();
    let mut qd = state.qdot.clone();
    for (row, &coord) in path.picked().iter().enumerate() {
        q[coord] = eval.r[row] + y_eq[row];
        qd[coord] = match path.mode() {
            PathMode::Time { .. } => eval.dr[row],
            PathMode::State { .. } => eval.dr[row] * nu,
        };
    }
    let predicted = GeneralizedState::new(q, qd);

    let input = fbl_control(model, path, &predicted, t, omega, gains)?;
    let qdd = forward_dynamics(model, &predicted, &input)?;
    let grf = model.ground_reaction(&predicted, &qdd);
    Ok(SteadyStatePrediction {
        state: predicted,
        input,
        grf,
    })
}

/// Normalized margins `m_i = C_i / s_i`, followed by the input box margins
/// when bounds are configured. Feasible exactly when every entry is
/// nonnegative.
pub fn constraint_margins<T: Real>(
    spec: &ConstraintSpec<T>,
    state: &GeneralizedState<T>,
    grf: Option<&GroundReaction<T>>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    let mut margins = Vec::with_capacity(spec.margin_len(u.len()));
    for c in &spec.constraints {
        let value = match &c.kind {
            ConstraintKind::MinCoordinate { index, min } => {
                if *index >= state.dof() {
                    return Err(CoreError::Config(format!(
                        "constraint `{}` indexes coordinate {index} of a {}-dof model",
                        c.name,
                        state.dof()
                    )));
                }
                state.q[*index] - *min
            }
            ConstraintKind::FrictionConeX => {
                let f = require_grf(grf, &c.name)?;
                spec.mu * f.fz - f.fx.abs()
            }
            ConstraintKind::FrictionConeY => {
                let f = require_grf(grf, &c.name)?;
                spec.mu * f.fz - f.fy.abs()
            }
            ConstraintKind::MinNormalForce { min } => {
                let f = require_grf(grf, &c.name)?;
                f.fz - *min
            }
            ConstraintKind::StateAffine { weights, offset } => {
                if weights.len() != state.dof() {
                    return Err(CoreError::Config(format!(
                        "constraint `{}` has {} weights for {} coordinates",
                        c.name,
                        weights.len(),
                        state.dof()
                    )));
                }
                weights.dot(&state.q) + *offset
            }
        };
        margins.push(value / c.scale);
    }
    if let Some(lower) = &spec.input_lower {
        for k in 0..u.len() {
            margins.push((u[k] - lower[k]) / spec.input_scale);
        }
    }
    if let Some(upper) = &spec.input_upper {
        for k in 0..u.len() {
            margins.push((upper[k] - u[k]) / spec.input_scale);
        }
    }
    Ok(DVector::from_vec(margins))
}

fn require_grf<'g, T: Real>(
    grf: Option<&'g GroundReaction<T>>,
    name: &str,
) -> Result<&'g GroundReaction<T>> {
    grf.ok_or_else(|| {
        CoreError::Config(format!(
            "constraint `{name}` needs contact forces, which this model does not provide"
        ))
    })
}

/// Sensitivity of the predicted steady-state margins to the primer, by
/// central differences over each primer channel.
pub fn margin_gradient<T: Real, M: Model<T>>(
    model: &M,
    path: &ReferencePath<T>,
    gains: &Gains<T>,
    spec: &ConstraintSpec<T>,
    omega: &DVector<T>,
    state: &GeneralizedState<T>,
    t: T,
    step: T,
) -> Result<DMatrix<T>> {
    if !(step > T::zero()) {
        return Err(CoreError::Config("finite-difference step must be positive".into()));
    }
    let probe = |w: &DVector<T>| -> Result<DVector<T>> {
        let pred = predict_steady_state(model, path, gains, w, state, t)?;
        constraint_margins(spec, &pred.state, pred.grf.as_ref(), &pred.input)
    };
    let rows = spec.margin_len(model.input_dim());
    let cols = omega.len();
    let mut grad = DMatrix::zeros(rows, cols);
    let half = T::one() / (step + step);
    for j in 0..cols {
        let mut wp = omega.clone();
        let mut wm = omega.clone();
        wp[j] += step;
        wm[j] -= step;
        let diff = (probe(&wp)? - probe(&wm)?) * half;
        grad.set_column(j, &diff);
    }
    Ok(grad)
}

/// Primer rate from the navigation field:
/// `ω̇ = κ_a Δ⁺ (−ω) + κ_r Σ_i max(0, ε_i − m_i) g_i`, clamped per channel
/// to the rate limit. `Δ⁺` is the worst margin clamped to `[0, 1]`, so the
/// attraction back to the unprimed reference fades out as the boundary
/// approaches and repulsion takes over.
pub fn primer_update<T: Real>(
    primer: &PrimerState<T>,
    margins: &DVector<T>,
    activation: &DVector<T>,
    gradient: &DMatrix<T>,
) -> DVector<T> {
    let params = &primer.params;
    let channels = primer.omega.len();
    let mut rate = DVector::zeros(channels);
    if margins.is_empty() {
        return rate;
    }
    let worst = margins.iter().copied().fold(T::max_value().unwrap(), T::min);
    let delta = worst.clamp(T::zero(), T::one());
    rate.axpy(-(params.attraction * delta), &primer.omega, T::one());
    for i in 0..margins.len() {
        let deficit = (activation[i] - margins[i]).max(T::zero());
        if deficit > T::zero() {
            rate += gradient.row(i).transpose() * (params.repulsion * deficit);
        }
    }
    for k in 0..channels {
        rate[k] = rate[k].clamp(-params.rate_limit, params.rate_limit);
    }
    rate
}
