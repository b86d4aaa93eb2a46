//! Exact discretization of the linearized dynamics on each grid interval.
//!
//! Each interval `[t_k, t_{k+1}]` is reduced to the affine map
//! `x_{k+1} = A_k x_k + B_k⁻ u_k + B_k⁺ u_{k+1} + s_k` by integrating one
//! augmented system: the nonlinear reference, the state transition matrix
//! `Φ̇ = A(ξ)Φ`, the two control quadratures `Φ⁻¹ λ± B` and the offset
//! quadrature `Φ⁻¹ s(ξ)`. All quadratures share right-hand-side evaluations;
//! `Φ⁻¹` is recomputed from the current `Φ` by LU factorization at every
//! evaluation. Intervals are independent of each other, so callers may
//! compute them in parallel and collect in index order.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::attitude::{ScalingSet, Trajectory};
use crate::dynamics::{derivative_in_place, PlantModel};
use crate::error::{Error, Result};
use crate::linearize::{jacobian_a, jacobian_b};
use crate::ode::{self, IntegratorSettings};

/// First-order-hold interpolation between node controls.
pub fn foh_interpolate(
    u_k: &DVector<f64>,
    u_k1: &DVector<f64>,
    t: f64,
    t_k: f64,
    t_k1: f64,
) -> Result<DVector<f64>> {
    if !(t_k1 > t_k) {
        return Err(Error::invalid("interval must have positive duration"));
    }
    if t < t_k || t > t_k1 {
        return Err(Error::invalid("interpolation time lies outside the interval"));
    }
    let lam_minus = (t_k1 - t) / (t_k1 - t_k);
    Ok(u_k * lam_minus + u_k1 * (1.0 - lam_minus))
}

/// Discrete affine dynamics of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrices {
    pub a: DMatrix<f64>,
    pub b_minus: DMatrix<f64>,
    pub b_plus: DMatrix<f64>,
    pub s: DVector<f64>,
}

impl IntervalMatrices {
    /// Apply the map to arbitrary node values.
    pub fn step(&self, x_k: &DVector<f64>, u_k: &DVector<f64>, u_k1: &DVector<f64>) -> DVector<f64> {
        let mut x = self.s.clone();
        x.gemv(1.0, &self.a, x_k, 1.0);
        x.gemv(1.0, &self.b_minus, u_k, 1.0);
        x.gemv(1.0, &self.b_plus, u_k1, 1.0);
        x
    }
}

/// The per-interval matrices for a whole reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLtv {
    pub intervals: Vec<IntervalMatrices>,
    pub state_dim: usize,
    pub input_dim: usize,
}

impl DiscreteLtv {
    pub fn interval_count(&self) -> usize {
        self.intervals.len()
    }
}

/// Discretize a single interval around the scaled reference node
/// `(x̄_k, ū_k, ū_{k+1})`.
pub fn discretize_interval(
    x_bar_k: &DVector<f64>,
    u_bar_k: &DVector<f64>,
    u_bar_k1: &DVector<f64>,
    t_k: f64,
    t_k1: f64,
    plant: &PlantModel,
    scaling: &ScalingSet,
    settings: &IntegratorSettings,
) -> Result<IntervalMatrices> {
    let n_x = plant.state_dim();
    let n_w = plant.n_wheels();
    if x_bar_k.len() != n_x {
        return Err(Error::DimensionMismatch { expected: n_x, actual: x_bar_k.len() });
    }
    if u_bar_k.len() != n_w || u_bar_k1.len() != n_w {
        return Err(Error::DimensionMismatch { expected: n_w, actual: u_bar_k.len() });
    }
    if !(t_k1 > t_k) {
        return Err(Error::invalid("interval must have positive duration"));
    }
    if !x_bar_k.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("reference state must be finite"));
    }

    let b = jacobian_b(plant, scaling);
    let dt = t_k1 - t_k;

    // Augmented layout: [x̄; Φ (column-major); B⁻; B⁺; s].
    let off_phi = n_x;
    let off_bm = off_phi + n_x * n_x;
    let off_bp = off_bm + n_x * n_w;
    let off_s = off_bp + n_x * n_w;
    let total = off_s + n_x;

    let mut y0 = DVector::zeros(total);
    y0.rows_mut(0, n_x).copy_from(x_bar_k);
    for i in 0..n_x {
        y0[off_phi + i * n_x + i] = 1.0;
    }

    let mut u = DVector::zeros(n_w);
    let mut f = DVector::zeros(n_x);
    let mut singular_phi = false;
    let rhs = |xi: f64, y: &DVector<f64>, dy: &mut DVector<f64>| {
        let x_ref = y.rows(0, n_x).into_owned();
        let lam_minus = (t_k1 - xi) / dt;
        u.copy_from(u_bar_k);
        u *= lam_minus;
        u.axpy(1.0 - lam_minus, u_bar_k1, 1.0);

        derivative_in_place(xi, &x_ref, &u, plant, scaling, &mut f);
        let a = jacobian_a(&x_ref, plant, scaling);
        let phi = DMatrix::from_column_slice(n_x, n_x, y.rows(off_phi, n_x * n_x).as_slice());

        dy.rows_mut(0, n_x).copy_from(&f);

        let dphi = &a * &phi;
        dy.rows_mut(off_phi, n_x * n_x).copy_from_slice(dphi.as_slice());

        // One LU factorization serves all three quadratures.
        let lu = phi.lu();
        // Columns: [B | s(ξ)] with s(ξ) = f − A x̄ − B ū.
        let mut stacked = DMatrix::zeros(n_x, n_w + 1);
        stacked.view_mut((0, 0), (n_x, n_w)).copy_from(&b);
        let mut s_col = f.clone();
        s_col.gemv(-1.0, &a, &x_ref, 1.0);
        s_col.gemv(-1.0, &b, &u, 1.0);
        stacked.column_mut(n_w).copy_from(&s_col);
        let solved = match lu.solve(&stacked) {
            Some(solved) => solved,
            None => {
                // A state transition matrix cannot be singular in exact
                // arithmetic; flag and bail out after integration.
                singular_phi = true;
                dy.fill(0.0);
                return;
            }
        };

        let phi_inv_b = solved.view((0, 0), (n_x, n_w));
        for c in 0..n_w {
            for r in 0..n_x {
                dy[off_bm + c * n_x + r] = lam_minus * phi_inv_b[(r, c)];
                dy[off_bp + c * n_x + r] = (1.0 - lam_minus) * phi_inv_b[(r, c)];
            }
        }
        dy.rows_mut(off_s, n_x).copy_from(&solved.column(n_w));
    };

    let y_end = ode::integrate(rhs, t_k, t_k1, &y0, settings)?;
    if singular_phi {
        return Err(Error::invalid("state transition matrix became singular"));
    }

    let a_k = DMatrix::from_column_slice(n_x, n_x, y_end.rows(off_phi, n_x * n_x).as_slice());
    let bm_int = DMatrix::from_column_slice(n_x, n_w, y_end.rows(off_bm, n_x * n_w).as_slice());
    let bp_int = DMatrix::from_column_slice(n_x, n_w, y_end.rows(off_bp, n_x * n_w).as_slice());
    let s_int = y_end.rows(off_s, n_x).into_owned();

    Ok(IntervalMatrices {
        b_minus: &a_k * bm_int,
        b_plus: &a_k * bp_int,
        s: &a_k * s_int,
        a: a_k,
    })
}

/// Discretize every interval of a scaled node sequence, sequentially.
pub fn discretize_nodes(
    x_nodes: &[DVector<f64>],
    u_nodes: &[DVector<f64>],
    times: &[f64],
    plant: &PlantModel,
    scaling: &ScalingSet,
    settings: &IntegratorSettings,
) -> Result<DiscreteLtv> {
    if x_nodes.len() != times.len() || u_nodes.len() != times.len() {
        return Err(Error::invalid("node arrays must match the time grid"));
    }
    if times.len() < 2 {
        return Err(Error::invalid("need at least two nodes"));
    }
    let mut intervals = Vec::with_capacity(times.len() - 1);
    for k in 0..times.len() - 1 {
        let m = discretize_interval(
            &x_nodes[k],
            &u_nodes[k],
            &u_nodes[k + 1],
            times[k],
            times[k + 1],
            plant,
            scaling,
            settings,
        )
        .map_err(|e| Error::Construction(alloc::format!("interval {k}: {e}")))?;
        intervals.push(m);
    }
    Ok(DiscreteLtv { intervals, state_dim: plant.state_dim(), input_dim: plant.n_wheels() })
}

/// Discretize a physical-units reference trajectory.
pub fn discretize_trajectory(
    reference: &Trajectory,
    plant: &PlantModel,
    scaling: &ScalingSet,
    settings: &IntegratorSettings,
) -> Result<DiscreteLtv> {
    let (x_nodes, u_nodes) = reference.to_scaled(scaling)?;
    discretize_nodes(&x_nodes, &u_nodes, &reference.times, plant, scaling, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::Quat;
    use crate::dynamics::{propagate_nodes, FohSegment};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};

    fn benchmark_plant() -> (PlantModel, ScalingSet) {
        let inertia = Matrix3::new(225.0, 10.0, -10.0, 10.0, 128.0, 10.0, -10.0, 10.0, 223.0);
        let s6 = libm::sqrt(6.0);
        let l = DMatrix::from_row_slice(3, 4, &[1.0, -1.0, -1.0, 1.0, s6, s6, s6, s6, 1.0, 1.0, -1.0, -1.0])
            * (libm::sqrt(2.0) / 4.0);
        let plant = PlantModel::new(inertia, l).unwrap();
        let scaling = ScalingSet::new(
            Vector3::from_element(5.0f64.to_radians()),
            DVector::from_element(4, 3.2),
            DVector::from_element(4, 0.172),
        )
        .unwrap();
        (plant, scaling)
    }

    fn series_expm(m: &DMatrix<f64>) -> DMatrix<f64> {
        // Scaling-and-squaring with a plain Taylor series; fine as a test
        // oracle for the small matrices used here.
        let n = m.nrows();
        let mut scaled = m.clone();
        let mut squarings = 0u32;
        while scaled.norm() > 0.25 {
            scaled /= 2.0;
            squarings += 1;
        }
        let mut result = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..30 {
            term = &term * &scaled / k as f64;
            result += &term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            result = &result * &result;
        }
        result
    }

    #[test]
    fn foh_endpoint_midpoint_constant() {
        let u0 = DVector::from_vec(alloc::vec![1.0, -2.0]);
        let u1 = DVector::from_vec(alloc::vec![3.0, 4.0]);
        assert_eq!(foh_interpolate(&u0, &u1, 2.0, 0.0, 2.0).unwrap(), u1);
        assert_eq!(foh_interpolate(&u0, &u1, 1.0, 0.0, 2.0).unwrap(), DVector::from_vec(alloc::vec![2.0, 1.0]));
        let c = DVector::from_vec(alloc::vec![5.0, 5.0]);
        assert_eq!(foh_interpolate(&c, &c, 0.7, 0.0, 2.0).unwrap(), c);
        assert!(foh_interpolate(&u0, &u1, 2.5, 0.0, 2.0).is_err());
    }

    #[test]
    fn equilibrium_reference_matches_matrix_exponential() {
        let (plant, scaling) = benchmark_plant();
        // At rest the Jacobian is constant along the interval, so the state
        // transition matrix must be the matrix exponential.
        let mut x = DVector::zeros(11);
        x[3] = 1.0;
        let u = DVector::zeros(4);
        let dt = 0.5;
        let m = discretize_interval(&x, &u, &u, 0.0, dt, &plant, &scaling, &IntegratorSettings::new(1e-10, 1e-10))
            .unwrap();
        let a0 = jacobian_a(&x, &plant, &scaling);
        let expected = series_expm(&(a0 * dt));
        assert!((&m.a - &expected).norm() < 1e-9, "STM vs expm: {:e}", (&m.a - &expected).norm());
    }

    #[test]
    fn momentum_rows_are_trapezoidal_in_the_control() {
        let (plant, scaling) = benchmark_plant();
        let mut x = DVector::zeros(11);
        x[3] = 1.0;
        let u = DVector::zeros(4);
        let dt = 2.0;
        let m = discretize_interval(&x, &u, &u, 0.0, dt, &plant, &scaling, &IntegratorSettings::new(1e-10, 1e-10))
            .unwrap();
        // Wheel states integrate ḣ_s = (τ_max/h_max) u under FOH: both B
        // blocks contribute Δt/2 · W_h W_τ⁻¹ on their own node.
        let gain = 0.172 / 3.2 * dt / 2.0;
        for j in 0..4 {
            assert_relative_eq!(m.b_minus[(7 + j, j)], gain, epsilon = 1e-9);
            assert_relative_eq!(m.b_plus[(7 + j, j)], gain, epsilon = 1e-9);
            assert_relative_eq!(m.a[(7 + j, 7 + j)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn discrete_map_reproduces_nonlinear_reference() {
        let (plant, scaling) = benchmark_plant();
        let q0 = Quat::new(-0.7, 0.05, -0.05, 0.7).normalized();
        let mut x0 = DVector::zeros(11);
        x0.rows_mut(0, 4).copy_from(&q0.as_vector());
        x0[5] = 0.3; // some body rate
        x0[7] = 0.4;
        x0[9] = -0.2;

        let times: Vec<f64> = (0..6).map(|k| k as f64 * 5.0).collect();
        let controls: Vec<DVector<f64>> =
            (0..6).map(|k| DVector::from_fn(4, |i, _| 0.3 * libm::sin(0.7 * k as f64 + i as f64))).collect();
        let reference =
            propagate_nodes(&x0, &times, &controls, &plant, &scaling, &IntegratorSettings::tight()).unwrap();

        let ltv = discretize_nodes(&reference, &controls, &times, &plant, &scaling, &IntegratorSettings::loose())
            .unwrap();
        assert_eq!(ltv.interval_count(), 5);
        for k in 0..5 {
            let predicted = ltv.intervals[k].step(&reference[k], &controls[k], &controls[k + 1]);
            let err = (&predicted - &reference[k + 1]).norm();
            assert!(err < 1e-4, "interval {k}: exactness error {err:e}");
        }
    }

    #[test]
    fn discrete_map_matches_ltv_integration_for_perturbed_inputs() {
        let (plant, scaling) = benchmark_plant();
        let q0 = Quat::new(0.1, -0.2, 0.05, 0.97).normalized();
        let mut x_bar = DVector::zeros(11);
        x_bar.rows_mut(0, 4).copy_from(&q0.as_vector());
        x_bar[4] = -0.2;
        x_bar[6] = 0.25;
        x_bar[8] = 0.5;
        let u_bar0 = DVector::from_vec(alloc::vec![0.2, -0.1, 0.05, 0.3]);
        let u_bar1 = DVector::from_vec(alloc::vec![-0.15, 0.25, 0.1, -0.05]);
        let (t0, t1) = (0.0, 4.0);

        let tight = IntegratorSettings::new(1e-10, 1e-10);
        let m = discretize_interval(&x_bar, &u_bar0, &u_bar1, t0, t1, &plant, &scaling, &tight).unwrap();

        // Perturbed node values.
        let dx = DVector::from_vec(alloc::vec![0.001, -0.002, 0.0015, 0.0, 0.003, -0.001, 0.002, 0.004, -0.003, 0.001, 0.002]);
        let x_k = &x_bar + &dx;
        let u_k = &u_bar0 + DVector::from_element(4, 0.005);
        let u_k1 = &u_bar1 - DVector::from_element(4, 0.004);
        let predicted = m.step(&x_k, &u_k, &u_k1);

        // Oracle: integrate the LTV ODE directly, co-propagating the
        // nonlinear reference that defines A(ξ) and s(ξ).
        let b = jacobian_b(&plant, &scaling);
        let mut y0 = DVector::zeros(22);
        y0.rows_mut(0, 11).copy_from(&x_k);
        y0.rows_mut(11, 11).copy_from(&x_bar);
        let y_end = ode::integrate(
            |xi, y, dy| {
                let x = y.rows(0, 11).into_owned();
                let x_ref = y.rows(11, 11).into_owned();
                let lam = (t1 - xi) / (t1 - t0);
                let u = &u_k * lam + &u_k1 * (1.0 - lam);
                let u_ref = &u_bar0 * lam + &u_bar1 * (1.0 - lam);
                let a = jacobian_a(&x_ref, &plant, &scaling);
                let f_ref = crate::dynamics::derivative(xi, &x_ref, &u_ref, &plant, &scaling);
                let mut s = f_ref.clone();
                s.gemv(-1.0, &a, &x_ref, 1.0);
                s.gemv(-1.0, &b, &u_ref, 1.0);
                let mut xdot = s;
                xdot.gemv(1.0, &a, &x, 1.0);
                xdot.gemv(1.0, &b, &u, 1.0);
                dy.rows_mut(0, 11).copy_from(&xdot);
                dy.rows_mut(11, 11).copy_from(&f_ref);
            },
            t0,
            t1,
            &y0,
            &tight,
        )
        .unwrap();
        let err = (predicted - y_end.rows(0, 11)).norm();
        assert!(err < 1e-6, "LTV oracle mismatch {err:e}");
    }

    #[test]
    fn two_nodes_degenerate_to_single_interval() {
        let (plant, scaling) = benchmark_plant();
        let mut x = DVector::zeros(11);
        x[3] = 1.0;
        let u = DVector::zeros(4);
        let times = alloc::vec![0.0, 5.0];
        let nodes = alloc::vec![x.clone(), x.clone()];
        let controls = alloc::vec![u.clone(), u.clone()];
        let ltv = discretize_nodes(&nodes, &controls, &times, &plant, &scaling, &IntegratorSettings::loose()).unwrap();
        assert_eq!(ltv.interval_count(), 1);
        let single =
            discretize_interval(&x, &u, &u, 0.0, 5.0, &plant, &scaling, &IntegratorSettings::loose()).unwrap();
        assert_eq!(ltv.intervals[0], single);
    }

    #[test]
    fn drift_reference_offset_is_consistent() {
        let (plant, scaling) = benchmark_plant();
        // All-zero control: the offset must account for the pure drift of a
        // spinning state, i.e. the map must reproduce the drifted reference.
        let q0 = Quat::new(0.0, 0.3, -0.1, 0.95).normalized();
        let mut x0 = DVector::zeros(11);
        x0.rows_mut(0, 4).copy_from(&q0.as_vector());
        x0[4] = 0.5;
        x0[6] = -0.4;
        let u = DVector::zeros(4);
        let seg = FohSegment { t0: 0.0, t1: 5.0, u0: &u, u1: &u };
        let x1 = crate::dynamics::propagate_segment(&x0, &seg, &plant, &scaling, &IntegratorSettings::tight()).unwrap();
        let m = discretize_interval(&x0, &u, &u, 0.0, 5.0, &plant, &scaling, &IntegratorSettings::new(1e-8, 1e-8))
            .unwrap();
        let predicted = m.step(&x0, &u, &u);
        assert!((predicted - x1).norm() < 1e-6);
    }

    #[test]
    fn trajectory_route_matches_scaled_route() {
        let (plant, scaling) = benchmark_plant();
        let times: Vec<f64> = alloc::vec![0.0, 4.0, 8.0];
        let mut x0 = DVector::zeros(11);
        x0[3] = 1.0;
        x0[5] = 0.2;
        let controls: Vec<DVector<f64>> =
            (0..3).map(|k| DVector::from_element(4, 0.1 * k as f64)).collect();
        let nodes = propagate_nodes(&x0, &times, &controls, &plant, &scaling, &IntegratorSettings::tight()).unwrap();
        let traj = crate::attitude::Trajectory::from_scaled(times.clone(), &nodes, &controls, &scaling).unwrap();
        let via_trajectory =
            discretize_trajectory(&traj, &plant, &scaling, &IntegratorSettings::loose()).unwrap();
        let via_nodes =
            discretize_nodes(&nodes, &controls, &times, &plant, &scaling, &IntegratorSettings::loose()).unwrap();
        assert_eq!(via_trajectory.interval_count(), 2);
        for (a, b) in via_trajectory.intervals.iter().zip(&via_nodes.intervals) {
            // Physical-units round trip may differ by strict float noise.
            assert!((&a.a - &b.a).norm() < 1e-12);
            assert!((&a.s - &b.s).norm() < 1e-12);
        }
    }

    #[test]
    fn benchmark_grid_has_39_intervals() {
        let (plant, scaling) = benchmark_plant();
        let times = crate::attitude::uniform_grid(200.0, 40);
        let mut x0 = DVector::zeros(11);
        x0[3] = 1.0;
        let controls: Vec<DVector<f64>> = (0..40).map(|_| DVector::zeros(4)).collect();
        let nodes =
            propagate_nodes(&x0, &times, &controls, &plant, &scaling, &IntegratorSettings::loose()).unwrap();
        let ltv = discretize_nodes(&nodes, &controls, &times, &plant, &scaling, &IntegratorSettings::loose()).unwrap();
        assert_eq!(ltv.interval_count(), 39);
        assert_relative_eq!(times[1] - times[0], 200.0 / 39.0, epsilon = 1e-12);
    }
}
