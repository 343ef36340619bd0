//! Output layer and tracking-law checks: reference derivatives against
//! finite differences, transversality roots, reduced-dynamics equivalence,
//! decoupling structure, and the primer-shifted closed-loop equilibrium.

mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use primer_gait_core::control::{
    decoupling_and_drift, fbl_control, steady_state_output, steady_state_residual, Gains,
};
use primer_gait_core::error::CoreError;
use primer_gait_core::model::{forward_dynamics, Model, TwoLink, Vlip};
use primer_gait_core::path::{PathMode, ReferencePath};
use primer_gait_core::sim::{rk4_step, run_scenario};
use primer_gait_core::state::GeneralizedState;
use primer_gait_core::vc::{
    manifold_configuration, output_and_derivative, restriction_dynamics, transversality,
};

// ---------------------------------------------------------------------------
// Reference evaluation

#[test]
fn reference_derivatives_match_finite_differences() {
    let coeffs = DMatrix::from_row_slice(2, 5, &[
        0.2, -1.3, 0.8, 2.1, -0.4, //
        1.0, 0.5, -0.5, 0.0, 1.5,
    ]);
    // Time mode over a 1.7 s period and state mode over an asymmetric range
    // exercise both chain rules.
    let paths = [
        ReferencePath::new(
            coeffs.clone(),
            PathMode::Time {
                period: 1.7,
                periodic: false,
            },
            DMatrix::identity(2, 2),
        )
        .unwrap(),
        ReferencePath::new(
            coeffs,
            PathMode::State { lo: -0.4, hi: 1.1 },
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        )
        .unwrap(),
    ];
    for path in &paths {
        let (lo, hi) = match path.mode() {
            PathMode::Time { period, .. } => (0.05 * period, 0.95 * period),
            PathMode::State { lo, hi } => (lo + 0.05, hi - 0.05),
        };
        let h = 1e-6 * (hi - lo);
        for i in 0..=40 {
            let p = lo + (hi - lo) * i as f64 / 40.0;
            let e = path.eval(p);
            let ep = path.eval(p + h);
            let em = path.eval(p - h);
            for row in 0..path.rows() {
                let fd1 = (ep.r[row] - em.r[row]) / (2.0 * h);
                let fd2 = (ep.dr[row] - em.dr[row]) / (2.0 * h);
                assert_relative_eq!(e.dr[row], fd1, epsilon = 1e-8, max_relative = 1e-8);
                assert_relative_eq!(e.ddr[row], fd2, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Output bookkeeping

#[test]
fn on_reference_outputs_vanish_without_primer() {
    let model = Vlip::point_mass(1.0);
    let path = common::wavy_vlip_path(2.0);
    let state = common::state_on_reference(&path, 3);
    let out = output_and_derivative(&model, &path, &state, 0.0, &DVector::zeros(3)).unwrap();
    assert!(out.y.amax() < 1e-14);
    assert!(out.ydot.amax() < 1e-14);
}

#[test]
fn primer_steps_into_the_rate_channel() {
    // Rates are measured against the primer-shifted velocity reference, so
    // switching on a constant primer c moves the measured rate by -c.
    let model = Vlip::point_mass(1.0);
    let path = common::wavy_vlip_path(2.0);
    let state = common::state_on_reference(&path, 3);
    let c = 0.37;
    let omega = DVector::from_row_slice(&[c, 0.0, 0.0]);
    let out = output_and_derivative(&model, &path, &state, 0.0, &omega).unwrap();
    assert!(out.y.amax() < 1e-14);
    assert_relative_eq!(out.ydot[0], -c, max_relative = 1e-14);
    assert!(out.ydot[1].abs() < 1e-14);
}

#[test]
fn output_rate_matches_trace_differentiation() {
    let path = common::wavy_vlip_path(2.0);
    let gains = Gains::uniform(3, 100.0, 20.0).unwrap();
    let mut initial = common::state_on_reference(&path, 3);
    initial.q[0] += 0.03;
    initial.q[2] -= 0.02;
    let scenario = common::bare_vlip_scenario(1.0, path, gains, 1e-4, 0.3, initial);
    let trace = run_scenario(&scenario).unwrap();
    for k in (1..trace.len() - 1).step_by(97) {
        let fd = (&trace.records[k + 1].y - &trace.records[k - 1].y) / (2.0 * trace.dt);
        assert!(
            (fd - &trace.records[k].ydot).amax() < 1e-6,
            "rate mismatch at sample {k}"
        );
    }
}

// ---------------------------------------------------------------------------
// Transversality and reduced dynamics

/// Elbow reference whose slope drives the transversality scalar through
/// zero inside the sampled range.
fn vanishing_alpha_path() -> ReferencePath<f64> {
    common::elbow_path(&[0.15, 0.0, -0.18], -0.05, 0.05)
}

fn bisect_root(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change to bisect");
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn engineered_reference_slope_annihilates_transversality() {
    let model = TwoLink::<f64>::fixture();
    let path = vanishing_alpha_path();
    let alpha = |q_n: f64| transversality(&model, &path, q_n).unwrap();
    assert!(alpha(-0.05) > 0.0);
    assert!(alpha(0.05) < 0.0);
    let root = bisect_root(&alpha, -0.05, 0.05);
    assert!(alpha(root).abs() < 1e-10);

    // The reduced dynamics refuse to divide by a vanishing scalar there.
    match restriction_dynamics(&model, &path, root, 0.1) {
        Err(CoreError::VanishingTransversality { location, .. }) => {
            assert_relative_eq!(location, root, epsilon = 1e-6);
        }
        other => panic!("expected vanishing transversality, got {other:?}"),
    }
}

#[test]
fn transversality_is_continuous_along_the_range() {
    let model = TwoLink::<f64>::fixture();
    let path = vanishing_alpha_path();
    let mut prev = None;
    for i in 0..=512 {
        let q_n = -0.05 + 0.1 * i as f64 / 512.0;
        let a = transversality(&model, &path, q_n).unwrap();
        if let Some(p) = prev {
            let jump = (a - p as f64).abs();
            assert!(jump < 5e-3, "jump {jump} at sample {i}");
        }
        prev = Some(a);
    }
}

#[test]
fn decoupling_singularity_coincides_with_transversality_zero() {
    let model = TwoLink::<f64>::fixture();
    let path = vanishing_alpha_path();
    let alpha = |q_n: f64| transversality(&model, &path, q_n).unwrap();
    let gamma = |q_n: f64| {
        let q = manifold_configuration(&model, &path, q_n).unwrap();
        let state = GeneralizedState::new(q, DVector::zeros(2));
        match decoupling_and_drift(&model, &path, &state, 0.0) {
            Ok(terms) => terms.gamma2[(0, 0)],
            Err(_) => 0.0,
        }
    };
    let root_alpha = bisect_root(&alpha, -0.05, 0.05);
    let root_gamma = bisect_root(&gamma, -0.05, 0.05);
    assert_relative_eq!(root_alpha, root_gamma, epsilon = 1e-6);
}

#[test]
fn reduced_dynamics_equal_the_constrained_full_model() {
    let model = TwoLink::<f64>::fixture();
    let path = common::elbow_path(&[0.4, 0.3, 0.2, 0.1], -0.9, 0.9);
    let gains = Gains::uniform(1, 400.0, 40.0).unwrap();

    // Pointwise: the unactuated row of the full dynamics under the exact
    // output-cancelling input matches the restriction ODE.
    for i in 0..20 {
        let q_n = -0.8 + 1.6 * i as f64 / 19.0;
        let qd_n = -1.5 + 3.0 * i as f64 / 19.0;
        let q = manifold_configuration(&model, &path, q_n).unwrap();
        let dr = path.eval(q_n).dr[0];
        let qd = DVector::from_row_slice(&[qd_n, dr * qd_n]);
        let state = GeneralizedState::new(q, qd);
        let u = fbl_control(&model, &path, &state, 0.0, &DVector::zeros(1), &gains).unwrap();
        let qdd_full = forward_dynamics(&model, &state, &u).unwrap();
        let qdd_reduced = restriction_dynamics(&model, &path, q_n, qd_n).unwrap();
        assert!(
            (qdd_full[0] - qdd_reduced).abs() < 1e-8,
            "row residual {} at q_n = {q_n}",
            (qdd_full[0] - qdd_reduced).abs()
        );
    }

    // Over time: integrate the reduced ODE and the full closed loop from the
    // same on-manifold start and compare the unactuated coordinate.
    let q_n0 = -0.5;
    let q0 = manifold_configuration(&model, &path, q_n0).unwrap();
    let initial = GeneralizedState::new(q0, DVector::zeros(2));
    let scenario = common::two_link_scenario(path.clone(), gains, 1e-3, 1.0, initial);
    let trace = run_scenario(&scenario).unwrap();

    let reduced = |_t: f64, x: &DVector<f64>| {
        let qdd = restriction_dynamics(&model, &path, x[0], x[1])?;
        Ok(DVector::from_row_slice(&[x[1], qdd]))
    };
    let mut z = DVector::from_row_slice(&[q_n0, 0.0]);
    let mut worst: f64 = 0.0;
    for (k, rec) in trace.records.iter().enumerate() {
        worst = worst.max((rec.q[0] - z[0]).abs());
        z = rk4_step(&reduced, &z, k as f64 * 1e-3, 1e-3).unwrap();
    }
    assert!(worst < 1e-3, "reduced/full gap {worst}");
}

// ---------------------------------------------------------------------------
// Decoupling terms

#[test]
fn fully_actuated_decoupling_is_the_inertia_inverse_through_the_input_map() {
    // With every coordinate tracked, the input-to-output-acceleration map is
    // D^{-1} B; the positive sign is what makes u = -gamma2^{-1}(...) a
    // stabilizing law.
    let model = Vlip::point_mass(2.0);
    let path = common::wavy_vlip_path(2.0);
    let mut rng = common::rng(21);
    for _ in 0..10 {
        let state = common::random_vlip_state(&mut rng);
        let terms = decoupling_and_drift(&model, &path, &state, 0.3).unwrap();
        let d = model.mass_matrix(&state.q).unwrap();
        let b = model.control_matrix(&state.q).unwrap();
        let expected = d.cholesky().unwrap().solve(&b);
        assert!((terms.gamma2.clone() - expected).amax() < 1e-12);
        // Explicit diagonal structure: channel u_len drives the len row.
        assert_relative_eq!(
            terms.gamma2[(2, 0)],
            1.0 / 2.0,
            max_relative = 1e-12
        );
    }
}

#[test]
fn drift_term_matches_passive_output_acceleration() {
    // At rest on a constant reference the drift is the gravity-induced
    // output acceleration; differentiate the measured rate along the
    // passive flow to check it.
    let model = Vlip::point_mass(1.0);
    let path = common::constant_vlip_path(0.5, 0.2, 1.1);
    let state = common::state_on_reference(&path, 3);
    let terms = decoupling_and_drift(&model, &path, &state, 0.0).unwrap();

    let u = DVector::zeros(3);
    let f = |_t: f64, x: &DVector<f64>| {
        let st = GeneralizedState::new(x.rows(0, 3).into_owned(), x.rows(3, 3).into_owned());
        let qdd = forward_dynamics(&model, &st, &u)?;
        let mut dx = DVector::zeros(6);
        dx.rows_mut(0, 3).copy_from(&st.qdot);
        dx.rows_mut(3, 3).copy_from(&qdd);
        Ok(dx)
    };
    let h = 1e-5;
    let mut x = DVector::zeros(6);
    x.rows_mut(0, 3).copy_from(&state.q);
    let omega = DVector::zeros(3);
    let ydot_at = |x: &DVector<f64>| {
        let st = GeneralizedState::new(x.rows(0, 3).into_owned(), x.rows(3, 3).into_owned());
        output_and_derivative(&model, &path, &st, 0.0, &omega)
            .unwrap()
            .ydot
    };
    let xp = rk4_step(&f, &x, 0.0, h).unwrap();
    let fd = (ydot_at(&xp) - ydot_at(&x)) / h;
    let gap = (&fd - &terms.gamma1).amax();
    assert!(gap < 1e-4, "drift mismatch {fd:?} vs {:?}", terms.gamma1);
}

// ---------------------------------------------------------------------------
// Tracking law

#[test]
fn on_manifold_control_is_pure_feedforward() {
    let model = Vlip::point_mass(1.0);
    let path = common::wavy_vlip_path(2.0);
    let gains = Gains::uniform(3, 100.0, 20.0).unwrap();
    let state = common::state_on_reference(&path, 3);
    let omega = DVector::zeros(3);
    let u = fbl_control(&model, &path, &state, 0.0, &omega, &gains).unwrap();
    let terms = decoupling_and_drift(&model, &path, &state, 0.0).unwrap();
    let ff = terms.gamma2.lu().solve(&(-terms.gamma1)).unwrap();
    assert!((u - ff).amax() < 1e-12);
}

#[test]
fn closed_loop_outputs_obey_the_assigned_linear_dynamics() {
    let path = common::wavy_vlip_path(2.0);
    let gains = Gains::uniform(3, 100.0, 20.0).unwrap();
    let mut initial = common::state_on_reference(&path, 3);
    initial.q[0] += 0.04;
    initial.qdot[1] -= 0.05;
    let scenario = common::bare_vlip_scenario(1.0, path, gains.clone(), 1e-4, 0.3, initial);
    let trace = run_scenario(&scenario).unwrap();
    for k in (1..trace.len() - 1).step_by(61) {
        let r = &trace.records[k];
        let yddot = (&trace.records[k + 1].ydot - &trace.records[k - 1].ydot) / (2.0 * trace.dt);
        let residual = yddot + gains.kp() * &r.y + gains.kd() * &r.ydot;
        assert!(
            residual.amax() < 1e-4,
            "linear-dynamics residual {} at sample {k}",
            residual.amax()
        );
    }
}

#[test]
fn proportional_gain_scales_its_error_component_exactly() {
    let model = Vlip::point_mass(1.0);
    let path = common::wavy_vlip_path(2.0);
    let mut rng = common::rng(23);
    let state = common::random_vlip_state(&mut rng);
    let omega = DVector::zeros(3);
    let g1 = Gains::uniform(3, 100.0, 20.0).unwrap();
    let g2 = Gains::uniform(3, 200.0, 20.0).unwrap();
    let u1 = fbl_control(&model, &path, &state, 0.1, &omega, &g1).unwrap();
    let u2 = fbl_control(&model, &path, &state, 0.1, &omega, &g2).unwrap();
    let terms = decoupling_and_drift(&model, &path, &state, 0.1).unwrap();
    let out = output_and_derivative(&model, &path, &state, 0.1, &omega).unwrap();
    // gamma2 (u2 - u1) = -(K2 - K1) y = -100 y.
    let diff = &terms.gamma2 * (u2 - u1);
    assert!((diff + &out.y * 100.0).amax() < 1e-10);
}

#[test]
fn output_norm_decays_at_the_slow_closed_loop_rate() {
    // Kp = 100, Kd = 25 puts the channel poles at -5 and -20; after the fast
    // mode dies the norm decays like exp(-5 t).
    let path = common::constant_vlip_path(0.5, 0.0, 1.0);
    let gains = Gains::uniform(3, 100.0, 25.0).unwrap();
    let mut initial = common::state_on_reference(&path, 3);
    initial.q[0] += 0.05;
    initial.q[1] += 0.05;
    initial.q[2] += 0.05;
    let scenario = common::bare_vlip_scenario(1.0, path, gains, 1e-3, 1.6, initial);
    let trace = run_scenario(&scenario).unwrap();
    let norm_at = |t: f64| {
        let k = (t / 1e-3).round() as usize;
        trace.records[k].y.norm()
    };
    let fitted = (norm_at(0.5) / norm_at(1.5)).ln() / 1.0;
    assert!(
        (fitted - 5.0).abs() < 0.5,
        "fitted decay rate {fitted}, expected 5 within 10%"
    );
}

#[test]
fn constant_primer_moves_the_equilibrium_to_the_deformed_manifold() {
    // Hold the primer fixed and check that the measured outputs settle on
    // the deformed-manifold offsets to 1e-6 after ten settling constants
    // of the slow pole.
    let path = common::constant_vlip_path(0.45, 0.1, 1.0);
    let gains = Gains::uniform(3, 100.0, 20.0).unwrap();
    let omega = DVector::from_row_slice(&[1e-3, -8e-4, 6e-4]);
    let initial = common::state_on_reference(&path, 3);
    let mut scenario = common::bare_vlip_scenario(1.0, path, gains.clone(), 1e-3, 1.0, initial);
    scenario.initial_omega = Some(omega.clone());
    let trace = run_scenario(&scenario).unwrap();
    let last = trace.last().unwrap();
    let (y_eq, ydot_eq) = steady_state_output(&gains, &omega);
    let pos_gap = (&last.y - &y_eq).amax();
    assert!(pos_gap < 1e-6, "position offset gap {pos_gap}");
    assert!((&last.ydot - ydot_eq).amax() < 1e-6);
    // And the settled pair sits on the steady-state locus.
    let res = steady_state_residual(&gains, &last.y, &last.ydot);
    assert!(res.amax() < 1e-6);
}

// ---------------------------------------------------------------------------
// Channel ordering sanity

struct PermutedInputs<M> {
    inner: M,
    perm: Vec<usize>,
}

impl<M: Model<f64>> Model<f64> for PermutedInputs<M> {
    fn dof(&self) -> usize {
        self.inner.dof()
    }
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn coordinate_names(&self) -> Vec<String> {
        self.inner.coordinate_names()
    }
    fn input_names(&self) -> Vec<String> {
        let names = self.inner.input_names();
        self.perm.iter().map(|&k| names[k].clone()).collect()
    }
    fn unactuated_index(&self) -> Option<usize> {
        self.inner.unactuated_index()
    }
    fn mass_matrix(&self, q: &DVector<f64>) -> primer_gait_core::Result<DMatrix<f64>> {
        self.inner.mass_matrix(q)
    }
    fn mass_matrix_partials(
        &self,
        q: &DVector<f64>,
    ) -> primer_gait_core::Result<Vec<DMatrix<f64>>> {
        self.inner.mass_matrix_partials(q)
    }
    fn gravity_vector(&self, q: &DVector<f64>) -> primer_gait_core::Result<DVector<f64>> {
        self.inner.gravity_vector(q)
    }
    fn control_matrix(&self, q: &DVector<f64>) -> primer_gait_core::Result<DMatrix<f64>> {
        let b = self.inner.control_matrix(q)?;
        let mut out = b.clone();
        for (new_col, &old_col) in self.perm.iter().enumerate() {
            out.set_column(new_col, &b.column(old_col));
        }
        Ok(out)
    }
    fn potential_energy(&self, q: &DVector<f64>) -> primer_gait_core::Result<f64> {
        self.inner.potential_energy(q)
    }
    fn validate_state(&self, state: &GeneralizedState<f64>) -> primer_gait_core::Result<()> {
        self.inner.validate_state(state)
    }
}

#[test]
fn control_output_follows_channel_reordering() {
    let base = Vlip::point_mass(1.0);
    let perm = vec![2usize, 0, 1];
    let permuted = PermutedInputs {
        inner: Vlip::point_mass(1.0),
        perm: perm.clone(),
    };
    let path = common::wavy_vlip_path(2.0);
    let gains = Gains::uniform(3, 100.0, 20.0).unwrap();
    let mut rng = common::rng(29);
    for _ in 0..10 {
        let state = common::random_vlip_state(&mut rng);
        let omega = DVector::from_fn(3, |_, _| rng.gen_range(-0.2..0.2));
        let u_base = fbl_control(&base, &path, &state, 0.2, &omega, &gains).unwrap();
        let u_perm = fbl_control(&permuted, &path, &state, 0.2, &omega, &gains).unwrap();
        for (new_col, &old_col) in perm.iter().enumerate() {
            assert_relative_eq!(u_perm[new_col], u_base[old_col], epsilon = 1e-10);
        }
    }
}

use rand::Rng;

// ---------------------------------------------------------------------------
// Cross-module property: transversality bounded away from zero makes the
// decoupling matrix invertible along the manifold.

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn bounded_transversality_implies_invertible_decoupling(
        c0 in -0.6_f64..0.6,
        c1 in -0.6_f64..0.6,
        c2 in -0.6_f64..0.6,
        c3 in -0.6_f64..0.6,
        qd in -2.0_f64..2.0,
    ) {
        let model = TwoLink::<f64>::fixture();
        let path = common::elbow_path(&[c0, c1, c2, c3], -0.5, 0.5);
        let samples = 65;
        let mut min_abs = f64::INFINITY;
        for i in 0..samples {
            let q_n = -0.5 + i as f64 / (samples - 1) as f64;
            min_abs = min_abs.min(transversality(&model, &path, q_n).unwrap().abs());
        }
        prop_assume!(min_abs > 0.05);
        for i in (0..samples).step_by(8) {
            let q_n = -0.5 + i as f64 / (samples - 1) as f64;
            let q = manifold_configuration(&model, &path, q_n).unwrap();
            let dr = path.eval(q_n).dr[0];
            let state = GeneralizedState::new(q, DVector::from_row_slice(&[qd, dr * qd]));
            let terms = decoupling_and_drift(&model, &path, &state, 0.0);
            prop_assert!(terms.is_ok(), "decoupling failed at q_n = {q_n}");
        }
    }
}
