//! Rigid-body + reaction-wheel equations of motion and truth propagation.
//!
//! All propagation works on the scaled state `x = [q; W_ω ω; W_h h]` with
//! scaled input `u = W_τ τ`. Controls are piecewise linear (first-order hold)
//! between node values.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::attitude::{quat_multiply, Quat, ScalingSet};
use crate::error::{Error, Result};
use crate::ode::{self, IntegratorSettings};

/// Disturbance torque as a plain function of time, N·m in body axes.
pub type DisturbanceFn = fn(f64) -> Vector3<f64>;

/// Inertia, wheel geometry and the disturbance plug point.
#[derive(Debug, Clone)]
pub struct PlantModel {
    /// Body-frame moment of inertia, kg·m².
    pub inertia: nalgebra::Matrix3<f64>,
    inertia_inv: nalgebra::Matrix3<f64>,
    /// Wheel torque distribution matrix `L`, 3×n_w with unit columns.
    pub torque_distribution: DMatrix<f64>,
    /// Optional disturbance torque; `None` means identically zero.
    pub disturbance: Option<DisturbanceFn>,
}

impl PlantModel {
    pub fn new(inertia: nalgebra::Matrix3<f64>, torque_distribution: DMatrix<f64>) -> Result<Self> {
        if (inertia - inertia.transpose()).norm() > 1e-9 * inertia.norm() {
            return Err(Error::invalid("inertia matrix must be symmetric"));
        }
        let chol = inertia.cholesky().ok_or_else(|| Error::invalid("inertia matrix must be positive definite"))?;
        let _ = chol;
        if torque_distribution.nrows() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, actual: torque_distribution.nrows() });
        }
        for j in 0..torque_distribution.ncols() {
            let norm = torque_distribution.column(j).norm();
            if libm::fabs(norm - 1.0) > 1e-9 {
                return Err(Error::invalid("wheel spin axes must be unit vectors"));
            }
        }
        let inertia_inv = inertia.try_inverse().ok_or_else(|| Error::invalid("inertia matrix must be invertible"))?;
        Ok(PlantModel { inertia, inertia_inv, torque_distribution, disturbance: None })
    }

    pub fn n_wheels(&self) -> usize {
        self.torque_distribution.ncols()
    }

    pub fn state_dim(&self) -> usize {
        7 + self.n_wheels()
    }

    pub fn inertia_inv(&self) -> &nalgebra::Matrix3<f64> {
        &self.inertia_inv
    }

    /// Plant with wheel `index` (0-based) removed: the corresponding column
    /// of `L` is deleted. Limit vectors must be shortened by the caller.
    pub fn with_wheel_removed(&self, index: usize) -> Result<Self> {
        let n_w = self.n_wheels();
        if index >= n_w {
            return Err(Error::invalid("wheel index out of range"));
        }
        let l = self.torque_distribution.clone().remove_column(index);
        let mut plant = PlantModel::new(self.inertia, l)?;
        plant.disturbance = self.disturbance;
        Ok(plant)
    }

    fn disturbance_at(&self, t: f64) -> Vector3<f64> {
        match self.disturbance {
            Some(d) => d(t),
            None => Vector3::zeros(),
        }
    }
}

/// Time derivative of the scaled state. Writes into `out` (length `7 + n_w`).
pub fn derivative_in_place(
    t: f64,
    x: &DVector<f64>,
    u: &DVector<f64>,
    plant: &PlantModel,
    scaling: &ScalingSet,
    out: &mut DVector<f64>,
) {
    let n_w = plant.n_wheels();
    debug_assert_eq!(x.len(), 7 + n_w);
    debug_assert_eq!(u.len(), n_w);
    debug_assert_eq!(out.len(), 7 + n_w);

    let q = Quat::new(x[0], x[1], x[2], x[3]);
    let omega = scaling.omega_from_scaled(x);
    let l = &plant.torque_distribution;

    // Body momentum contributions from the wheels: L h and L τ.
    let mut lh = Vector3::zeros();
    let mut ltau = Vector3::zeros();
    for j in 0..n_w {
        let h_j = x[7 + j] * scaling.h_max[j];
        let tau_j = u[j] * scaling.tau_max[j];
        for i in 0..3 {
            lh[i] += l[(i, j)] * h_j;
            ltau[i] += l[(i, j)] * tau_j;
        }
    }

    let q_dot = quat_multiply(&q, &Quat { v: omega, s: 0.0 });
    out[0] = 0.5 * q_dot.v[0];
    out[1] = 0.5 * q_dot.v[1];
    out[2] = 0.5 * q_dot.v[2];
    out[3] = 0.5 * q_dot.s;

    let torque = (plant.inertia * omega + lh).cross(&omega) - ltau + plant.disturbance_at(t);
    let omega_dot = plant.inertia_inv * torque;
    for i in 0..3 {
        out[4 + i] = omega_dot[i] / scaling.omega_max[i];
    }
    for j in 0..n_w {
        out[7 + j] = u[j] * scaling.tau_max[j] / scaling.h_max[j];
    }
}

/// Allocating wrapper around [`derivative_in_place`].
pub fn derivative(t: f64, x: &DVector<f64>, u: &DVector<f64>, plant: &PlantModel, scaling: &ScalingSet) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    derivative_in_place(t, x, u, plant, scaling, &mut out);
    out
}

/// First-order-hold control segment on `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct FohSegment<'a> {
    pub t0: f64,
    pub t1: f64,
    pub u0: &'a DVector<f64>,
    pub u1: &'a DVector<f64>,
}

impl FohSegment<'_> {
    pub fn control_at(&self, t: f64, out: &mut DVector<f64>) {
        let lam_minus = (self.t1 - t) / (self.t1 - self.t0);
        out.copy_from(self.u0);
        *out *= lam_minus;
        out.axpy(1.0 - lam_minus, self.u1, 1.0);
    }
}

/// Propagate the scaled state across one FOH segment.
pub fn propagate_segment(
    x0: &DVector<f64>,
    segment: &FohSegment<'_>,
    plant: &PlantModel,
    scaling: &ScalingSet,
    settings: &IntegratorSettings,
) -> Result<DVector<f64>> {
    if !(segment.t1 > segment.t0) {
        return Err(Error::invalid("segment must have positive duration"));
    }
    let mut u = DVector::zeros(plant.n_wheels());
    ode::integrate(
        |t, x, dx| {
            segment.control_at(t, &mut u);
            derivative_in_place(t, x, &u, plant, scaling, dx);
        },
        segment.t0,
        segment.t1,
        x0,
        settings,
    )
}

/// Propagate across a full node grid; returns the `N` node states starting
/// with `x0` itself.
pub fn propagate_nodes(
    x0: &DVector<f64>,
    times: &[f64],
    controls: &[DVector<f64>],
    plant: &PlantModel,
    scaling: &ScalingSet,
    settings: &IntegratorSettings,
) -> Result<Vec<DVector<f64>>> {
    if times.len() != controls.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), actual: controls.len() });
    }
    let mut states = Vec::with_capacity(times.len());
    states.push(x0.clone());
    for k in 0..times.len().saturating_sub(1) {
        let segment = FohSegment { t0: times[k], t1: times[k + 1], u0: &controls[k], u1: &controls[k + 1] };
        let next = propagate_segment(states.last().expect("nonempty"), &segment, plant, scaling, settings)?;
        states.push(next);
    }
    Ok(states)
}

/// Truth propagation with `substeps` dense samples per interval (endpoints
/// included once). Used for supersampled diagnostics.
pub fn propagate_dense(
    x0: &DVector<f64>,
    times: &[f64],
    controls: &[DVector<f64>],
    substeps: usize,
    plant: &PlantModel,
    scaling: &ScalingSet,
    settings: &IntegratorSettings,
) -> Result<Vec<(f64, DVector<f64>)>> {
    if substeps == 0 {
        return Err(Error::invalid("substeps must be at least 1"));
    }
    let mut out = Vec::new();
    out.push((times[0], x0.clone()));
    let mut x = x0.clone();
    for k in 0..times.len().saturating_sub(1) {
        let (t0, t1) = (times[k], times[k + 1]);
        let samples: Vec<f64> = (1..=substeps).map(|i| t0 + (t1 - t0) * i as f64 / substeps as f64).collect();
        let segment = FohSegment { t0, t1, u0: &controls[k], u1: &controls[k + 1] };
        let mut u = DVector::zeros(plant.n_wheels());
        let dense = ode::integrate_dense(
            |t, y, dy| {
                segment.control_at(t, &mut u);
                derivative_in_place(t, y, &u, plant, scaling, dy);
            },
            t0,
            t1,
            &x,
            settings,
            &samples,
        )?;
        x = dense.last().expect("at least one sample").clone();
        out.extend(samples.into_iter().zip(dense));
    }
    Ok(out)
}

/// Total angular momentum expressed in the inertial frame; conserved under
/// zero input and zero disturbance.
pub fn inertial_momentum(x: &DVector<f64>, plant: &PlantModel, scaling: &ScalingSet) -> Result<Vector3<f64>> {
    let q = Quat::new(x[0], x[1], x[2], x[3]).normalized();
    let omega = scaling.omega_from_scaled(x);
    let h = scaling.h_from_scaled(x);
    let mut lh = Vector3::zeros();
    for j in 0..plant.n_wheels() {
        for i in 0..3 {
            lh[i] += plant.torque_distribution[(i, j)] * h[j];
        }
    }
    crate::attitude::rotate_to_inertial(&q, &(plant.inertia * omega + lh))
}
