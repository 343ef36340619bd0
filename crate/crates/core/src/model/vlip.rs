//! Variable-length inverted pendulum: a point mass on a massless prismatic
//! leg pinned to the ground at the stance contact.
//!
//! Coordinates are `q = [theta, phi, len]`: inclination from the ground-plane
//! normal, heading about the normal, and leg length. The mass sits at
//! `p = p1 + len * [sinθ cosφ, sinθ sinφ, cosθ]`, which gives the diagonal
//! inertia `D = m * diag(len², len² sin²θ, 1)` and potential
//! `V = m g len cosθ`.
//!
//! The heading coordinate loses inertia as `θ → 0` (azimuth singularity), so
//! states are only valid above a small inclination floor.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{CoreError, Result};
use crate::model::{require_finite_vector, GroundReaction, Model};
use crate::state::GeneralizedState;
use crate::{lit, Real};

/// How thrust enters the pendulum dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThrustMode<T: Real> {
    /// Thrusters act as generalized torques on inclination and heading;
    /// input channels are `[u_len, tau_theta, tau_phi]`.
    DirectTorques,
    /// Thrust is a world-frame force applied at a point a fixed fraction of
    /// the leg length above the contact; input channels are
    /// `[u_len, f_x, f_y, f_z]` and the force columns of the control matrix
    /// are the transposed point Jacobian.
    LegPoint { leg_fraction: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlipParams<T: Real> {
    /// Point mass in kg.
    pub mass: T,
    /// Gravitational acceleration in m/s².
    pub gravity: T,
    /// Stance contact point `p1` in the world frame.
    pub contact: Vector3<T>,
    pub thrust: ThrustMode<T>,
    /// Inclination floor below which states are rejected, rad.
    pub min_theta: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vlip<T: Real> {
    pub params: VlipParams<T>,
}

impl<T: Real> Vlip<T> {
    pub fn new(params: VlipParams<T>) -> Result<Self> {
        if !(params.mass > T::zero()) {
            return Err(CoreError::Config("mass must be positive".into()));
        }
        if !(params.gravity > T::zero()) {
            return Err(CoreError::Config("gravity must be positive".into()));
        }
        if let ThrustMode::LegPoint { leg_fraction } = params.thrust {
            if !(leg_fraction > T::zero()) {
                return Err(CoreError::Config("leg_fraction must be positive".into()));
            }
        }
        Ok(Self { params })
    }

    /// Point mass with direct thruster torques, standard gravity, and the
    /// contact at the origin.
    pub fn point_mass(mass: T) -> Self {
        Self {
            params: VlipParams {
                mass,
                gravity: lit(9.81),
                contact: Vector3::zeros(),
                thrust: ThrustMode::DirectTorques,
                min_theta: lit(0.01),
            },
        }
    }

    fn unit_vectors(theta: T, phi: T) -> (Vector3<T>, Vector3<T>, Vector3<T>) {
        let (st, ct) = (theta.sin(), theta.cos());
        let (sp, cp) = (phi.sin(), phi.cos());
        let e_r = Vector3::new(st * cp, st * sp, ct);
        let e_t = Vector3::new(ct * cp, ct * sp, -st);
        let e_p = Vector3::new(-sp, cp, T::zero());
        (e_r, e_t, e_p)
    }

    /// Center-of-mass position in the world frame.
    pub fn com_position(&self, q: &DVector<T>) -> Vector3<T> {
        let (e_r, _, _) = Self::unit_vectors(q[0], q[1]);
        self.params.contact + e_r * q[2]
    }

    /// Center-of-mass velocity in the world frame.
    pub fn com_velocity(&self, q: &DVector<T>, qdot: &DVector<T>) -> Vector3<T> {
        let (e_r, e_t, e_p) = Self::unit_vectors(q[0], q[1]);
        let len = q[2];
        let st = q[0].sin();
        e_r * qdot[2] + e_t * (len * qdot[0]) + e_p * (len * st * qdot[1])
    }

    /// Center-of-mass acceleration from a consistent `(q, q̇, q̈)` triple.
    pub fn com_acceleration(
        &self,
        q: &DVector<T>,
        qdot: &DVector<T>,
        qddot: &DVector<T>,
    ) -> Vector3<T> {
        let (e_r, e_t, e_p) = Self::unit_vectors(q[0], q[1]);
        let (st, ct) = (q[0].sin(), q[0].cos());
        let len = q[2];
        let (td, pd, ld) = (qdot[0], qdot[1], qdot[2]);
        let (tdd, pdd, ldd) = (qddot[0], qddot[1], qddot[2]);
        let two = lit::<T>(2.0);

        let radial = ldd - len * td * td - len * st * st * pd * pd;
        let polar = len * tdd + two * ld * td - len * pd * pd * st * ct;
        let azimuthal = len * st * pdd + two * ld * pd * st + two * len * td * pd * ct;
        e_r * radial + e_t * polar + e_p * azimuthal
    }
}

impl<T: Real> Model<T> for Vlip<T> {
    fn dof(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        match self.params.thrust {
            ThrustMode::DirectTorques => 3,
            ThrustMode::LegPoint { .. } => 4,
        }
    }

    fn coordinate_names(&self) -> Vec<String> {
        vec!["theta".into(), "phi".into(), "len".into()]
    }

    fn input_names(&self) -> Vec<String> {
        match self.params.thrust {
            ThrustMode::DirectTorques => {
                vec!["u_len".into(), "tau_theta".into(), "tau_phi".into()]
            }
            ThrustMode::LegPoint { .. } => {
                vec!["u_len".into(), "f_x".into(), "f_y".into(), "f_z".into()]
            }
        }
    }

    fn unactuated_index(&self) -> Option<usize> {
        None
    }

    fn mass_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        require_finite_vector(q, "configuration")?;
        let m = self.params.mass;
        let len = q[2];
        let st = q[0].sin();
        let mut d = DMatrix::zeros(3, 3);
        d[(0, 0)] = m * len * len;
        d[(1, 1)] = m * len * len * st * st;
        d[(2, 2)] = m;
        Ok(d)
    }

    fn mass_matrix_partials(&self, q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
        require_finite_vector(q, "configuration")?;
        let m = self.params.mass;
        let len = q[2];
        let (st, ct) = (q[0].sin(), q[0].cos());
        let two = lit::<T>(2.0);

        let mut d_theta = DMatrix::zeros(3, 3);
        d_theta[(1, 1)] = two * m * len * len * st * ct;

        let d_phi = DMatrix::zeros(3, 3);

        let mut d_len = DMatrix::zeros(3, 3);
        d_len[(0, 0)] = two * m * len;
        d_len[(1, 1)] = two * m * len * st * st;

        Ok(vec![d_theta, d_phi, d_len])
    }

    fn gravity_vector(&self, q: &DVector<T>) -> Result<DVector<T>> {
        require_finite_vector(q, "configuration")?;
        let mg = self.params.mass * self.params.gravity;
        let (st, ct) = (q[0].sin(), q[0].cos());
        Ok(DVector::from_row_slice(&[-mg * q[2] * st, T::zero(), mg * ct]))
    }

    fn control_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        require_finite_vector(q, "configuration")?;
        match self.params.thrust {
            ThrustMode::DirectTorques => {
                // Channels [u_len, tau_theta, tau_phi] map one-to-one onto
                // the [len, theta, phi] coordinates.
                let mut b = DMatrix::zeros(3, 3);
                b[(0, 1)] = T::one();
                b[(1, 2)] = T::one();
                b[(2, 0)] = T::one();
                Ok(b)
            }
            ThrustMode::LegPoint { leg_fraction } => {
                let (e_r, e_t, e_p) = Self::unit_vectors(q[0], q[1]);
                let len = q[2];
                let st = q[0].sin();
                // Point Jacobian of p_thrust = p1 + leg_fraction * len * e_r,
                // columns ordered [theta, phi, len].
                let jt = e_t * (leg_fraction * len);
                let jp = e_p * (leg_fraction * len * st);
                let jl = e_r * leg_fraction;
                let mut b = DMatrix::zeros(3, 4);
                b[(2, 0)] = T::one();
                for world in 0..3 {
                    b[(0, 1 + world)] = jt[world];
                    b[(1, 1 + world)] = jp[world];
                    b[(2, 1 + world)] = jl[world];
                }
                Ok(b)
            }
        }
    }

    fn potential_energy(&self, q: &DVector<T>) -> Result<T> {
        require_finite_vector(q, "configuration")?;
        Ok(self.params.mass * self.params.gravity * q[2] * q[0].cos())
    }

    fn validate_state(&self, state: &GeneralizedState<T>) -> Result<()> {
        state.require_finite()?;
        if state.dof() != 3 {
            return Err(CoreError::Config(format!(
                "pendulum state needs 3 coordinates, got {}",
                state.dof()
            )));
        }
        let theta = state.q[0];
        let len = state.q[2];
        if !(len > T::zero()) {
            return Err(CoreError::InvalidState(format!(
                "leg length must be positive, got {}",
                len.to_f64().unwrap_or(f64::NAN)
            )));
        }
        if theta < self.params.min_theta {
            return Err(CoreError::InvalidState(format!(
                "inclination {} below azimuth-singularity floor {}",
                theta.to_f64().unwrap_or(f64::NAN),
                self.params.min_theta.to_f64().unwrap_or(f64::NAN)
            )));
        }
        if theta > T::frac_pi_2() {
            return Err(CoreError::InvalidState(format!(
                "inclination {} beyond horizontal",
                theta.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(())
    }

    fn ground_reaction(
        &self,
        state: &GeneralizedState<T>,
        qddot: &DVector<T>,
    ) -> Option<GroundReaction<T>> {
        // Newton balance of the point mass: F = m (p̈ + g e_z).
        let acc = self.com_acceleration(&state.q, &state.qdot, qddot);
        let m = self.params.mass;
        Some(GroundReaction {
            fx: m * acc[0],
            fy: m * acc[1],
            fz: m * (acc[2] + self.params.gravity),
        })
    }
}
