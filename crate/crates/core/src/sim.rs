//! Fixed-step closed-loop simulation: plant, tracking law, and primer
//! integrate together under classical RK4.
//!
//! The augmented state is `[q, q̇, ω, ∫ω]`, so the primer dynamics are
//! resolved by the same integrator as the plant. Every logged quantity is a
//! pure function of `(t, q, q̇, ω)`; traces carry no hidden state.

use nalgebra::DVector;

use crate::control::{fbl_control, Gains};
use crate::error::{CoreError, Result};
use crate::governor::{
    constraint_margins, margin_gradient, predict_steady_state, primer_update, ConstraintSpec,
    PrimerParams, PrimerState,
};
use crate::model::{forward_dynamics, GroundReaction, Model};
use crate::path::ReferencePath;
use crate::state::GeneralizedState;
use crate::vc::output_and_derivative;
use crate::{lit, Real};

/// A complete closed-loop run description.
#[derive(Debug, Clone)]
pub struct Scenario<T: Real, M: Model<T>> {
    pub model: M,
    pub path: ReferencePath<T>,
    pub gains: Gains<T>,
    pub constraints: ConstraintSpec<T>,
    pub primer: PrimerParams<T>,
    pub primer_enabled: bool,
    /// Integration step, seconds.
    pub dt: T,
    /// Horizon, seconds.
    pub t_end: T,
    pub initial: GeneralizedState<T>,
    /// Starting primer value; zero when absent. With the governor disabled
    /// the primer stays at this value for the whole run.
    pub initial_omega: Option<DVector<T>>,
}

impl<T: Real, M: Model<T>> Scenario<T, M> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(CoreError::Config("dt must be positive".into()));
        }
        if self.t_end < self.dt {
            return Err(CoreError::Config("t_end must be at least dt".into()));
        }
        if self.gains.rows() != self.path.rows() {
            return Err(CoreError::Config(format!(
                "gains cover {} channels for {} tracked outputs",
                self.gains.rows(),
                self.path.rows()
            )));
        }
        if let Some(&coord) = self.path.picked().iter().find(|&&c| c >= self.model.dof()) {
            return Err(CoreError::Config(format!(
                "reference selector picks coordinate {coord} of a {}-dof model",
                self.model.dof()
            )));
        }
        self.constraints.validate()?;
        self.model.validate_state(&self.initial)
    }

    fn steps(&self) -> usize {
        let ratio = (self.t_end / self.dt).to_f64().unwrap_or(1.0);
        (ratio.round() as usize).max(1)
    }
}

/// One logged sample. All fields are recomputable from `(t, q, q̇, ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T: Real> {
    pub t: T,
    pub q: DVector<T>,
    pub qdot: DVector<T>,
    pub u: DVector<T>,
    pub grf: Option<GroundReaction<T>>,
    pub margins: DVector<T>,
    pub omega: DVector<T>,
    pub omega_integral: DVector<T>,
    pub y: DVector<T>,
    pub ydot: DVector<T>,
}

/// Time series of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T: Real> {
    pub records: Vec<TraceRecord<T>>,
    pub dt: T,
}

/// A maximal run of consecutive samples with a margin below zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Episode<T: Real> {
    pub start: T,
    pub duration: T,
}

/// Violation accounting for one margin row.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationStats<T: Real> {
    pub name: String,
    pub samples: usize,
    pub duration: T,
    pub episodes: Vec<Episode<T>>,
}

/// Min/max of one logged column.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats<T: Real> {
    pub name: String,
    pub min: T,
    pub max: T,
}

/// Per-run aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<T: Real> {
    pub channels: Vec<ChannelStats<T>>,
    pub violations: Vec<ViolationStats<T>>,
    /// Samples where at least one margin is negative.
    pub any_violation_samples: usize,
    /// Samples where some input channel exceeds its configured bounds.
    pub input_saturation_samples: usize,
}

impl<T: Real> Trace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord<T>> {
        self.records.last()
    }

    /// Samples with any margin below zero.
    pub fn any_violation_samples(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.margins.iter().any(|m| *m < T::zero()))
            .count()
    }

    /// Samples where margin `idx` is below `level`.
    pub fn samples_below(&self, idx: usize, level: T) -> usize {
        self.records
            .iter()
            .filter(|r| r.margins[idx] < level)
            .count()
    }

    /// Maximal consecutive runs where margin `idx` is below `level`.
    pub fn episodes_below(&self, idx: usize, level: T) -> Vec<Episode<T>> {
        let mut episodes = Vec::new();
        let mut open: Option<(T, usize)> = None;
        for r in &self.records {
            if r.margins[idx] < level {
                open = match open {
                    Some((start, count)) => Some((start, count + 1)),
                    None => Some((r.t, 1)),
                };
            } else if let Some((start, count)) = open.take() {
                episodes.push(Episode {
                    start,
                    duration: self.dt * T::from_usize(count).unwrap(),
                });
            }
        }
        if let Some((start, count)) = open {
            episodes.push(Episode {
                start,
                duration: self.dt * T::from_usize(count).unwrap(),
            });
        }
        episodes
    }

    /// Column names in logging order, matching [`TraceRecord::values`].
    pub fn column_names<M: Model<T>>(scenario: &Scenario<T, M>, has_grf: bool) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        let coords = scenario.model.coordinate_names();
        cols.extend(coords.iter().map(|c| format!("q_{c}")));
        cols.extend(coords.iter().map(|c| format!("qd_{c}")));
        cols.extend(scenario.model.input_names().iter().map(|u| format!("u_{u}")));
        if has_grf {
            cols.extend(["Fx".into(), "Fy".into(), "Fz".into()]);
        }
        cols.extend(
            scenario
                .constraints
                .margin_names(&scenario.model.input_names())
                .iter()
                .map(|m| format!("margin_{m}")),
        );
        let rows = scenario.path.rows();
        cols.extend((0..rows).map(|k| format!("omega_{k}")));
        cols.extend((0..rows).map(|k| format!("y_{k}")));
        cols.extend((0..rows).map(|k| format!("yd_{k}")));
        cols
    }

    /// Aggregate channel ranges, violation counts, durations, and episodes.
    pub fn summary<M: Model<T>>(&self, scenario: &Scenario<T, M>) -> RunSummary<T> {
        let has_grf = self.records.first().map_or(false, |r| r.grf.is_some());
        let names = Self::column_names(scenario, has_grf);
        let mut channels: Vec<ChannelStats<T>> = Vec::new();
        for r in &self.records {
            let values = r.values();
            if channels.is_empty() {
                channels = names
                    .iter()
                    .zip(values.iter())
                    .skip(1)
                    .map(|(n, v)| ChannelStats {
                        name: n.clone(),
                        min: *v,
                        max: *v,
                    })
                    .collect();
            } else {
                for (c, v) in channels.iter_mut().zip(values.iter().skip(1)) {
                    c.min = c.min.min(*v);
                    c.max = c.max.max(*v);
                }
            }
        }

        let margin_names = scenario
            .constraints
            .margin_names(&scenario.model.input_names());
        let violations = margin_names
            .iter()
            .enumerate()
            .map(|(idx, name)| {
                let samples = self.samples_below(idx, T::zero());
                ViolationStats {
                    name: name.clone(),
                    samples,
                    duration: self.dt * T::from_usize(samples).unwrap(),
                    episodes: self.episodes_below(idx, T::zero()),
                }
            })
            .collect();

        let input_saturation_samples = self
            .records
            .iter()
            .filter(|r| {
                let lower = scenario.constraints.input_lower.as_ref();
                let upper = scenario.constraints.input_upper.as_ref();
                (0..r.u.len()).any(|k| {
                    lower.map_or(false, |lo| r.u[k] < lo[k])
                        || upper.map_or(false, |hi| r.u[k] > hi[k])
                })
            })
            .count();

        RunSummary {
            channels,
            violations,
            any_violation_samples: self.any_violation_samples(),
            input_saturation_samples,
        }
    }
}

impl<T: Real> TraceRecord<T> {
    /// Flatten in the order of [`Trace::column_names`].
    pub fn values(&self) -> Vec<T> {
        let mut v = vec![self.t];
        v.extend(self.q.iter().copied());
        v.extend(self.qdot.iter().copied());
        v.extend(self.u.iter().copied());
        if let Some(f) = &self.grf {
            v.extend([f.fx, f.fy, f.fz]);
        }
        v.extend(self.margins.iter().copied());
        v.extend(self.omega.iter().copied());
        v.extend(self.y.iter().copied());
        v.extend(self.ydot.iter().copied());
        v
    }
}

/// One classical RK4 step of `ẋ = f(t, x)`.
pub fn rk4_step<T: Real, F>(f: &F, x: &DVector<T>, t: T, dt: T) -> Result<DVector<T>>
where
    F: Fn(T, &DVector<T>) -> Result<DVector<T>>,
{
    let half = dt * lit::<T>(0.5);
    let sixth = dt / lit::<T>(6.0);
    let two = lit::<T>(2.0);

    let k1 = f(t, x)?;
    let k2 = f(t + half, &(x + &k1 * half))?;
    let k3 = f(t + half, &(x + &k2 * half))?;
    let k4 = f(t + dt, &(x + &k3 * dt))?;
    let next = x + (k1 + k2 * two + k3 * two + k4) * sixth;
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(CoreError::IntegrationFailure {
            t: t.to_f64().unwrap_or(f64::NAN),
            detail: "step produced non-finite state".into(),
        })
    }
}

/// The closed-loop vector field and its logging helpers.
pub struct ClosedLoop<'a, T: Real, M: Model<T>> {
    pub scenario: &'a Scenario<T, M>,
}

impl<'a, T: Real, M: Model<T>> ClosedLoop<'a, T, M> {
    pub fn new(scenario: &'a Scenario<T, M>) -> Self {
        Self { scenario }
    }

    fn dims(&self) -> (usize, usize) {
        (self.scenario.model.dof(), self.scenario.path.rows())
    }

    pub fn pack(
        &self,
        state: &GeneralizedState<T>,
        omega: &DVector<T>,
        omega_integral: &DVector<T>,
    ) -> DVector<T> {
        let (n, p) = self.dims();
        let mut x = DVector::zeros(2 * n + 2 * p);
        x.rows_mut(0, n).copy_from(&state.q);
        x.rows_mut(n, n).copy_from(&state.qdot);
        x.rows_mut(2 * n, p).copy_from(omega);
        x.rows_mut(2 * n + p, p).copy_from(omega_integral);
        x
    }

    pub fn unpack(&self, x: &DVector<T>) -> (GeneralizedState<T>, DVector<T>, DVector<T>) {
        let (n, p) = self.dims();
        let state = GeneralizedState::new(
            x.rows(0, n).into_owned(),
            x.rows(n, n).into_owned(),
        );
        (
            state,
            x.rows(2 * n, p).into_owned(),
            x.rows(2 * n + p, p).into_owned(),
        )
    }

    /// Primer rate at one state; zero when the governor is disabled.
    pub fn primer_rate(
        &self,
        t: T,
        state: &GeneralizedState<T>,
        omega: &DVector<T>,
    ) -> Result<DVector<T>> {
        let sc = self.scenario;
        if !sc.primer_enabled {
            return Ok(DVector::zeros(sc.path.rows()));
        }
        let pred = predict_steady_state(&sc.model, &sc.path, &sc.gains, omega, state, t)?;
        let margins = constraint_margins(&sc.constraints, &pred.state, pred.grf.as_ref(), &pred.input)?;
        let gradient = margin_gradient(
            &sc.model,
            &sc.path,
            &sc.gains,
            &sc.constraints,
            omega,
            state,
            t,
            sc.primer.fd_step,
        )?;
        let activation = sc.constraints.activation_margins(sc.model.input_dim());
        let primer = PrimerState {
            omega: omega.clone(),
            omega_integral: DVector::zeros(omega.len()),
            params: sc.primer,
        };
        Ok(primer_update(&primer, &margins, &activation, &gradient))
    }

    /// Augmented vector field `d/dt [q, q̇, ω, ∫ω]`.
    pub fn derivative(&self, t: T, x: &DVector<T>) -> Result<DVector<T>> {
        let sc = self.scenario;
        let (state, omega, _) = self.unpack(x);
        sc.model.validate_state(&state)?;
        let omega_dot = self.primer_rate(t, &state, &omega)?;
        let u = fbl_control(&sc.model, &sc.path, &state, t, &omega, &sc.gains)?;
        let qdd = forward_dynamics(&sc.model, &state, &u)?;
        let (n, p) = self.dims();
        let mut dx = DVector::zeros(2 * n + 2 * p);
        dx.rows_mut(0, n).copy_from(&state.qdot);
        dx.rows_mut(n, n).copy_from(&qdd);
        dx.rows_mut(2 * n, p).copy_from(&omega_dot);
        dx.rows_mut(2 * n + p, p).copy_from(&omega);
        Ok(dx)
    }

    /// Recompute every logged quantity at one augmented state.
    pub fn record(&self, t: T, x: &DVector<T>) -> Result<TraceRecord<T>> {
        let sc = self.scenario;
        let (state, omega, omega_integral) = self.unpack(x);
        let u = fbl_control(&sc.model, &sc.path, &state, t, &omega, &sc.gains)?;
        let qdd = forward_dynamics(&sc.model, &state, &u)?;
        let grf = sc.model.ground_reaction(&state, &qdd);
        let margins = constraint_margins(&sc.constraints, &state, grf.as_ref(), &u)?;
        let out = output_and_derivative(&sc.model, &sc.path, &state, t, &omega)?;
        Ok(TraceRecord {
            t,
            q: state.q,
            qdot: state.qdot,
            u,
            grf,
            margins,
            omega,
            omega_integral,
            y: out.y,
            ydot: out.ydot,
        })
    }
}

fn wrap_step_error<T: Real>(err: CoreError, t: T) -> CoreError {
    match err {
        e @ CoreError::IntegrationFailure { .. } => e,
        other => CoreError::IntegrationFailure {
            t: t.to_f64().unwrap_or(f64::NAN),
            detail: other.to_string(),
        },
    }
}

/// Integrate a scenario and log one record per step, at the step start.
pub fn run_scenario<T: Real, M: Model<T>>(scenario: &Scenario<T, M>) -> Result<Trace<T>> {
    scenario.validate()?;
    let closed_loop = ClosedLoop::new(scenario);
    let p = scenario.path.rows();
    let omega0 = scenario
        .initial_omega
        .clone()
        .unwrap_or_else(|| DVector::zeros(p));
    if omega0.len() != p {
        return Err(CoreError::Config(format!(
            "initial primer has {} channels for {} outputs",
            omega0.len(),
            p
        )));
    }
    let mut x = closed_loop.pack(&scenario.initial, &omega0, &DVector::zeros(p));
    let steps = scenario.steps();
    let mut records = Vec::with_capacity(steps);
    let f = |t: T, x: &DVector<T>| closed_loop.derivative(t, x);
    for step in 0..steps {
        let t = scenario.dt * T::from_usize(step).unwrap();
        records.push(closed_loop.record(t, &x).map_err(|e| wrap_step_error(e, t))?);
        x = rk4_step(&f, &x, t, scenario.dt).map_err(|e| wrap_step_error(e, t))?;
    }
    Ok(Trace {
        records,
        dt: scenario.dt,
    })
}

/// Paired primed/unprimed runs of the same scenario.
#[derive(Debug, Clone)]
pub struct Comparison<T: Real> {
    pub primed: Trace<T>,
    pub unprimed: Trace<T>,
}

/// Run the scenario twice from identical initial conditions, with the
/// governor on and off.
pub fn compare_runs<T: Real, M: Model<T> + Clone>(
    scenario: &Scenario<T, M>,
) -> Result<Comparison<T>> {
    let mut primed = scenario.clone();
    primed.primer_enabled = true;
    let mut unprimed = scenario.clone();
    unprimed.primer_enabled = false;
    Ok(Comparison {
        primed: run_scenario(&primed)?,
        unprimed: run_scenario(&unprimed)?,
    })
}
