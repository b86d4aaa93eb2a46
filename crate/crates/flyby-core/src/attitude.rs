//! Quaternion algebra, unit scaling and the state/control containers shared
//! by every other module.
//!
//! Quaternions are stored in `[v1 v2 v3 s]` order (vector part first). The
//! selection matrices of the conic transcription rely on this order, so it is
//! fixed crate-wide. A state quaternion rotates inertial coordinates into the
//! body frame.

use alloc::vec::Vec;

use nalgebra::{DVector, Matrix3, Vector3, Vector4};

use crate::error::{Error, Result};

/// Unit-quaternion norm tolerance accepted by rotation routines.
pub const QUAT_NORM_TOL: f64 = 1e-6;

/// Attitude quaternion, vector part first: `[v1 v2 v3 s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub v: Vector3<f64>,
    pub s: f64,
}

impl Quat {
    pub const fn new(v1: f64, v2: f64, v3: f64, s: f64) -> Self {
        Quat { v: Vector3::new(v1, v2, v3), s }
    }

    pub const fn identity() -> Self {
        Quat::new(0.0, 0.0, 0.0, 1.0)
    }

    pub fn from_vector(w: &Vector4<f64>) -> Self {
        Quat { v: Vector3::new(w[0], w[1], w[2]), s: w[3] }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.v[0], self.v[1], self.v[2], self.s)
    }

    /// Rotation by `angle` about a unit `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let half = 0.5 * angle;
        Quat { v: axis * libm::sin(half), s: libm::cos(half) }
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.v.norm_squared() + self.s * self.s)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Quat { v: self.v / n, s: self.s / n }
    }

    pub fn conjugate(&self) -> Self {
        Quat { v: -self.v, s: self.s }
    }
}

/// Hamilton product `p ⊗ q`, consistent with the kinematics
/// `q̇ = ½ q ⊗ [ω; 0]`.
pub fn quat_multiply(p: &Quat, q: &Quat) -> Quat {
    Quat {
        v: p.s * q.v + q.s * p.v + p.v.cross(&q.v),
        s: p.s * q.s - p.v.dot(&q.v),
    }
}

/// Skew-symmetric matrix `[a]×` such that `[a]× b = a × b`.
pub fn cross_matrix(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -a[2], a[1], //
        a[2], 0.0, -a[0], //
        -a[1], a[0], 0.0,
    )
}

/// Coordinates of the inertial vector `r` in the body frame:
/// `[r_B; 0] = q* ⊗ [r; 0] ⊗ q`.
///
/// Fails if `q` is more than [`QUAT_NORM_TOL`] away from unit norm.
pub fn rotate_by_quaternion(q: &Quat, r: &Vector3<f64>) -> Result<Vector3<f64>> {
    if libm::fabs(q.norm() - 1.0) > QUAT_NORM_TOL {
        return Err(Error::invalid("rotation requires a unit quaternion"));
    }
    let pure = Quat { v: *r, s: 0.0 };
    let rotated = quat_multiply(&quat_multiply(&q.conjugate(), &pure), q);
    Ok(rotated.v)
}

/// Inverse of [`rotate_by_quaternion`]: body coordinates back to inertial.
pub fn rotate_to_inertial(q: &Quat, r_body: &Vector3<f64>) -> Result<Vector3<f64>> {
    rotate_by_quaternion(&q.conjugate(), r_body)
}

/// Spacecraft state in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacecraftState {
    pub q: Quat,
    /// Body angular rate, rad/s.
    pub omega: Vector3<f64>,
    /// Stored wheel momenta, N·m·s (one entry per active wheel).
    pub h_wheels: DVector<f64>,
}

/// Wheel motor torques, N·m (one entry per active wheel).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    pub tau: DVector<f64>,
}

impl ControlInput {
    pub fn zeros(n_wheels: usize) -> Self {
        ControlInput { tau: DVector::zeros(n_wheels) }
    }
}

/// Diagonal scaling built from the maximum expected magnitudes; every entry
/// of the W matrices is the reciprocal of the corresponding limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSet {
    pub omega_max: Vector3<f64>,
    pub h_max: DVector<f64>,
    pub tau_max: DVector<f64>,
}

impl ScalingSet {
    pub fn new(omega_max: Vector3<f64>, h_max: DVector<f64>, tau_max: DVector<f64>) -> Result<Self> {
        if h_max.len() != tau_max.len() {
            return Err(Error::DimensionMismatch { expected: h_max.len(), actual: tau_max.len() });
        }
        let all_positive = omega_max.iter().chain(h_max.iter()).chain(tau_max.iter()).all(|&m| m > 0.0);
        if !all_positive {
            return Err(Error::invalid("scaling limits must be strictly positive"));
        }
        Ok(ScalingSet { omega_max, h_max, tau_max })
    }

    pub fn n_wheels(&self) -> usize {
        self.h_max.len()
    }

    /// Scaled state dimension `7 + n_w`.
    pub fn state_dim(&self) -> usize {
        7 + self.n_wheels()
    }

    /// `[q(4); W_ω ω(3); W_h h(n_w)]`.
    pub fn scale_state(&self, state: &SpacecraftState) -> Result<DVector<f64>> {
        let n_w = self.n_wheels();
        if state.h_wheels.len() != n_w {
            return Err(Error::DimensionMismatch { expected: n_w, actual: state.h_wheels.len() });
        }
        let mut x = DVector::zeros(7 + n_w);
        x.fixed_rows_mut::<4>(0).copy_from(&state.q.as_vector());
        for i in 0..3 {
            x[4 + i] = state.omega[i] / self.omega_max[i];
        }
        for i in 0..n_w {
            x[7 + i] = state.h_wheels[i] / self.h_max[i];
        }
        Ok(x)
    }

    pub fn unscale_state(&self, x: &DVector<f64>) -> Result<SpacecraftState> {
        let n_w = self.n_wheels();
        if x.len() != 7 + n_w {
            return Err(Error::DimensionMismatch { expected: 7 + n_w, actual: x.len() });
        }
        let q = Quat::new(x[0], x[1], x[2], x[3]);
        let omega = Vector3::new(x[4] * self.omega_max[0], x[5] * self.omega_max[1], x[6] * self.omega_max[2]);
        let h_wheels = DVector::from_fn(n_w, |i, _| x[7 + i] * self.h_max[i]);
        Ok(SpacecraftState { q, omega, h_wheels })
    }

    pub fn scale_control(&self, control: &ControlInput) -> Result<DVector<f64>> {
        let n_w = self.n_wheels();
        if control.tau.len() != n_w {
            return Err(Error::DimensionMismatch { expected: n_w, actual: control.tau.len() });
        }
        Ok(DVector::from_fn(n_w, |i, _| control.tau[i] / self.tau_max[i]))
    }

    pub fn unscale_control(&self, u: &DVector<f64>) -> Result<ControlInput> {
        let n_w = self.n_wheels();
        if u.len() != n_w {
            return Err(Error::DimensionMismatch { expected: n_w, actual: u.len() });
        }
        Ok(ControlInput { tau: DVector::from_fn(n_w, |i, _| u[i] * self.tau_max[i]) })
    }

    /// Physical body rate from the scaled state slice.
    pub fn omega_from_scaled(&self, x: &DVector<f64>) -> Vector3<f64> {
        Vector3::new(x[4] * self.omega_max[0], x[5] * self.omega_max[1], x[6] * self.omega_max[2])
    }

    /// Physical wheel momenta from the scaled state slice.
    pub fn h_from_scaled(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n_wheels(), |i, _| x[7 + i] * self.h_max[i])
    }
}

/// Sampled trajectory: `N` node times with one state and one control each.
/// Controls are interpreted as first-order-hold between adjacent nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpacecraftState>,
    pub controls: Vec<ControlInput>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<SpacecraftState>, controls: Vec<ControlInput>) -> Result<Self> {
        if times.len() != states.len() || times.len() != controls.len() {
            return Err(Error::invalid("times, states and controls must have equal length"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("a trajectory needs at least two nodes"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("trajectory must start at t = 0"));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::invalid("node times must be strictly increasing"));
        }
        Ok(Trajectory { times, states, controls })
    }

    pub fn node_count(&self) -> usize {
        self.times.len()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has nodes")
    }

    /// Scaled node states and controls.
    pub fn to_scaled(&self, scaling: &ScalingSet) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        let states = self.states.iter().map(|s| scaling.scale_state(s)).collect::<Result<Vec<_>>>()?;
        let controls = self.controls.iter().map(|c| scaling.scale_control(c)).collect::<Result<Vec<_>>>()?;
        Ok((states, controls))
    }

    pub fn from_scaled(
        times: Vec<f64>,
        states: &[DVector<f64>],
        controls: &[DVector<f64>],
        scaling: &ScalingSet,
    ) -> Result<Self> {
        let states = states.iter().map(|x| scaling.unscale_state(x)).collect::<Result<Vec<_>>>()?;
        let controls = controls.iter().map(|u| scaling.unscale_control(u)).collect::<Result<Vec<_>>>()?;
        Trajectory::new(times, states, controls)
    }
}

/// Uniform node grid `t_0 = 0, …, t_{N−1} = t_f`.
pub fn uniform_grid(t_f: f64, n_nodes: usize) -> Vec<f64> {
    let dt = t_f / (n_nodes - 1) as f64;
    (0..n_nodes).map(|k| if k + 1 == n_nodes { t_f } else { k as f64 * dt }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_unit_quat(seed: [f64; 4]) -> Quat {
        Quat::new(seed[0], seed[1], seed[2], seed[3]).normalized()
    }

    #[test]
    fn identity_multiplication() {
        let q = Quat::new(0.1, -0.2, 0.3, 0.9).normalized();
        let e = Quat::identity();
        assert_eq!(quat_multiply(&e, &q), q);
        assert_eq!(quat_multiply(&q, &e), q);
    }

    #[test]
    fn conjugate_is_inverse() {
        let q = Quat::new(0.4, 0.3, -0.2, 0.85).normalized();
        let p = quat_multiply(&q, &q.conjugate());
        assert_relative_eq!(p.s, 1.0, epsilon = 1e-14);
        assert_relative_eq!(p.v.norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn cross_matrix_reproduces_cross_product() {
        let a = Vector3::new(1.0, 0.0, 0.0);
        let b = Vector3::new(0.0, 1.0, 0.0);
        assert_eq!(cross_matrix(&a) * b, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(cross_matrix(&Vector3::zeros()), Matrix3::zeros());
    }

    #[test]
    fn rotation_identity_and_half_turn() {
        let r = Vector3::new(1.0, 0.0, 0.0);
        let rotated = rotate_by_quaternion(&Quat::identity(), &r).unwrap();
        assert_relative_eq!(rotated, r, epsilon = 1e-15);

        let half_turn = Quat::from_axis_angle(&Vector3::z(), core::f64::consts::PI);
        let rotated = rotate_by_quaternion(&half_turn, &r).unwrap();
        assert_relative_eq!(rotated, Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn rotation_rejects_non_unit_quaternion() {
        let q = Quat::new(0.0, 0.0, 0.0, 1.1);
        assert!(rotate_by_quaternion(&q, &Vector3::x()).is_err());
    }

    #[test]
    fn scaling_round_trip_and_limits() {
        // Wheel limits matching the benchmark hardware: 3.2 N·m·s per wheel.
        let scaling = ScalingSet::new(
            Vector3::new(0.1, 0.2, 0.3),
            DVector::from_element(4, 3.2),
            DVector::from_element(4, 0.172),
        )
        .unwrap();

        let state = SpacecraftState {
            q: Quat::new(-0.7, 0.05, -0.05, 0.7).normalized(),
            omega: Vector3::new(0.1, 0.2, 0.3),
            h_wheels: DVector::from_vec(alloc::vec![3.2, 0.0, 0.0, 0.0]),
        };
        let x = scaling.scale_state(&state).unwrap();
        // omega at its limit maps to ones, h = h_max on wheel 1 maps to [1,0,0,0].
        assert_relative_eq!(x[4], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[5], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[6], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[7], 1.0, epsilon = 1e-14);
        assert_eq!(x[8], 0.0);

        let back = scaling.unscale_state(&x).unwrap();
        assert_relative_eq!(back.omega, state.omega, max_relative = 1e-14);
        assert_relative_eq!(back.h_wheels, state.h_wheels, max_relative = 1e-14);
        assert_relative_eq!(back.q.as_vector(), state.q.as_vector(), max_relative = 1e-14);
    }

    #[test]
    fn scaling_rejects_bad_dimensions() {
        let scaling = ScalingSet::new(
            Vector3::from_element(1.0),
            DVector::from_element(4, 1.0),
            DVector::from_element(4, 1.0),
        )
        .unwrap();
        let state = SpacecraftState {
            q: Quat::identity(),
            omega: Vector3::zeros(),
            h_wheels: DVector::zeros(3),
        };
        assert!(scaling.scale_state(&state).is_err());
    }

    #[test]
    fn trajectory_validation() {
        let mk_state = || SpacecraftState {
            q: Quat::identity(),
            omega: Vector3::zeros(),
            h_wheels: DVector::zeros(4),
        };
        let bad = Trajectory::new(
            alloc::vec![0.0, 0.0],
            alloc::vec![mk_state(), mk_state()],
            alloc::vec![ControlInput::zeros(4), ControlInput::zeros(4)],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn uniform_grid_endpoints() {
        let grid = uniform_grid(200.0, 40);
        assert_eq!(grid.len(), 40);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[39], 200.0);
        assert_relative_eq!(grid[1], 200.0 / 39.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn product_of_unit_quaternions_is_unit(
            a in proptest::array::uniform4(-1.0f64..1.0),
            b in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            prop_assume!(a.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            prop_assume!(b.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let p = random_unit_quat(a);
            let q = random_unit_quat(b);
            let n = quat_multiply(&p, &q).norm();
            prop_assert!((n - 1.0).abs() < 1e-12);
        }

        #[test]
        fn multiplication_is_associative(
            a in proptest::array::uniform4(-1.0f64..1.0),
            b in proptest::array::uniform4(-1.0f64..1.0),
            c in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            prop_assume!(a.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            prop_assume!(b.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            prop_assume!(c.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let (p, q, r) = (random_unit_quat(a), random_unit_quat(b), random_unit_quat(c));
            let lhs = quat_multiply(&quat_multiply(&p, &q), &r).as_vector();
            let rhs = quat_multiply(&p, &quat_multiply(&q, &r)).as_vector();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn cross_matrix_is_skew_and_annihilates_self(
            a in proptest::array::uniform3(-10.0f64..10.0),
        ) {
            let v = Vector3::new(a[0], a[1], a[2]);
            let m = cross_matrix(&v);
            prop_assert!((m + m.transpose()).norm() == 0.0);
            prop_assert!((m * v).norm() < 1e-12);
        }

        #[test]
        fn rotation_preserves_norm(
            a in proptest::array::uniform4(-1.0f64..1.0),
            r in proptest::array::uniform3(-5.0f64..5.0),
        ) {
            prop_assume!(a.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let q = random_unit_quat(a);
            let v = Vector3::new(r[0], r[1], r[2]);
            let rotated = rotate_by_quaternion(&q, &v).unwrap();
            prop_assert!((rotated.norm() - v.norm()).abs() < 1e-12);
        }

        #[test]
        fn scale_unscale_round_trip(
            w in proptest::array::uniform3(-0.08f64..0.08),
            h in proptest::array::uniform4(-3.0f64..3.0),
        ) {
            let scaling = ScalingSet::new(
                Vector3::from_element(0.0872664625997),
                DVector::from_element(4, 3.2),
                DVector::from_element(4, 0.172),
            ).unwrap();
            let state = SpacecraftState {
                q: Quat::new(0.1, 0.2, -0.3, 0.9).normalized(),
                omega: Vector3::new(w[0], w[1], w[2]),
                h_wheels: DVector::from_vec(h.to_vec()),
            };
            let back = scaling.unscale_state(&scaling.scale_state(&state).unwrap()).unwrap();
            prop_assert!((back.omega - state.omega).norm() <= 1e-14 * (1.0 + state.omega.norm()));
            prop_assert!((&back.h_wheels - &state.h_wheels).norm() <= 1e-14 * (1.0 + state.h_wheels.norm()));
        }
    }
}
