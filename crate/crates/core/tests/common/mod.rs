#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use primer_gait_core::control::Gains;
use primer_gait_core::governor::{ConstraintSpec, PrimerParams};
use primer_gait_core::model::{TwoLink, Vlip};
use primer_gait_core::path::{PathMode, ReferencePath};
use primer_gait_core::sim::Scenario;
use primer_gait_core::state::GeneralizedState;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random pendulum state inside the validity region used by the structural
/// checks: inclination in (0.01, pi/2 - 0.01), leg length in [0.2, 2].
pub fn random_vlip_state(rng: &mut impl Rng) -> GeneralizedState<f64> {
    let theta = rng.gen_range(0.02..(std::f64::consts::FRAC_PI_2 - 0.01));
    let phi = rng.gen_range(-3.0..3.0);
    let len = rng.gen_range(0.2..2.0);
    let qd = [
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
    ];
    GeneralizedState::from_slices(&[theta, phi, len], &qd)
}

pub fn random_two_link_state(rng: &mut impl Rng) -> GeneralizedState<f64> {
    GeneralizedState::from_slices(
        &[rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)],
        &[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
    )
}

/// Time-based reference holding a constant set-point on all three pendulum
/// coordinates.
pub fn constant_vlip_path(theta: f64, phi: f64, len: f64) -> ReferencePath<f64> {
    let coeffs = DMatrix::from_row_slice(
        3,
        3,
        &[theta, theta, theta, phi, phi, phi, len, len, len],
    );
    ReferencePath::new(
        coeffs,
        PathMode::Time {
            period: 1.0,
            periodic: true,
        },
        DMatrix::identity(3, 3),
    )
    .unwrap()
}

/// Smooth periodic pendulum reference, gentle enough to stay feasible.
pub fn wavy_vlip_path(period: f64) -> ReferencePath<f64> {
    let coeffs = DMatrix::from_row_slice(
        3,
        5,
        &[
            0.30, 0.38, 0.22, 0.38, 0.30, // theta
            0.10, 0.35, -0.15, 0.35, 0.10, // phi
            0.80, 0.95, 0.70, 0.95, 0.80, // len
        ],
    );
    ReferencePath::new(
        coeffs,
        PathMode::Time {
            period,
            periodic: true,
        },
        DMatrix::identity(3, 3),
    )
    .unwrap()
}

/// State-based elbow reference for the two-link fixture.
pub fn elbow_path(coeffs: &[f64], lo: f64, hi: f64) -> ReferencePath<f64> {
    ReferencePath::new(
        DMatrix::from_row_slice(1, coeffs.len(), coeffs),
        PathMode::State { lo, hi },
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    )
    .unwrap()
}

/// Pendulum scenario with no constraints and the governor off; tests enable
/// and configure what they need.
pub fn bare_vlip_scenario(
    mass: f64,
    path: ReferencePath<f64>,
    gains: Gains<f64>,
    dt: f64,
    t_end: f64,
    initial: GeneralizedState<f64>,
) -> Scenario<f64, Vlip<f64>> {
    Scenario {
        model: Vlip::point_mass(mass),
        path,
        gains,
        constraints: ConstraintSpec::empty(),
        primer: PrimerParams::default(),
        primer_enabled: false,
        dt,
        t_end,
        initial,
        initial_omega: None,
    }
}

pub fn two_link_scenario(
    path: ReferencePath<f64>,
    gains: Gains<f64>,
    dt: f64,
    t_end: f64,
    initial: GeneralizedState<f64>,
) -> Scenario<f64, TwoLink<f64>> {
    Scenario {
        model: TwoLink::fixture(),
        path,
        gains,
        constraints: ConstraintSpec::empty(),
        primer: PrimerParams::default(),
        primer_enabled: false,
        dt,
        t_end,
        initial,
        initial_omega: None,
    }
}

/// State on the reference of a time-based path at t = 0.
pub fn state_on_reference(path: &ReferencePath<f64>, dof: usize) -> GeneralizedState<f64> {
    let eval = path.eval(0.0);
    let mut q = DVector::zeros(dof);
    let mut qd = DVector::zeros(dof);
    for (row, &coord) in path.picked().iter().enumerate() {
        q[coord] = eval.r[row];
        qd[coord] = eval.dr[row];
    }
    GeneralizedState::new(q, qd)
}
