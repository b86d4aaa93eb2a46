//! Pointing constraints as quadratic forms on the attitude quaternion and
//! their second-order-cone factorizations.
//!
//! For an inertial target direction `r` and a body-fixed instrument axis `ν`,
//! the angle `θ` between them satisfies `cos θ = −qᵀ P(r, ν) q`. The matrices
//! `I ± P` are positive semidefinite with eigenvalues {0, 0, 2, 2}, so the
//! keep-in and keep-out conditions become norm constraints `‖N q‖ ≤ √(1 −
//! cos θ_max)` and `‖M q‖ ≤ √(1 + cos θ_min)` with `NᵀN = I + P` and
//! `MᵀM = I − P`.

use nalgebra::{Matrix4, Vector3};

use crate::attitude::{cross_matrix, rotate_by_quaternion, Quat};
use crate::error::{Error, Result};

/// Eigenvalues of `I ± P` below this threshold trigger a factorization
/// error; anything in `(-PSD_TOL, 0)` is clamped to zero.
pub const PSD_TOL: f64 = 1e-9;

fn check_unit(name: &str, v: &Vector3<f64>) -> Result<()> {
    if libm::fabs(v.norm() - 1.0) > 1e-9 {
        return Err(Error::invalid(alloc::format!("{name} must be a unit vector")));
    }
    Ok(())
}

/// The indefinite pointing matrix `P(r, ν)` with eigenvalues ±1, built as the
/// product of the two augmented skew-symmetric factors.
pub fn pointing_matrix(r: &Vector3<f64>, nu: &Vector3<f64>) -> Result<Matrix4<f64>> {
    check_unit("target direction", r)?;
    check_unit("instrument axis", nu)?;
    let mut left = Matrix4::zeros();
    left.fixed_view_mut::<3, 3>(0, 0).copy_from(&cross_matrix(r));
    left.fixed_view_mut::<3, 1>(0, 3).copy_from(r);
    left.fixed_view_mut::<1, 3>(3, 0).copy_from(&(-r.transpose()));
    let mut right = Matrix4::zeros();
    right.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-cross_matrix(nu)));
    right.fixed_view_mut::<3, 1>(0, 3).copy_from(nu);
    right.fixed_view_mut::<1, 3>(3, 0).copy_from(&(-nu.transpose()));
    let p = left * right;
    // The factors commute, so P is symmetric up to round-off; symmetrize for
    // the eigensolver downstream.
    Ok((p + p.transpose()) * 0.5)
}

/// `cos θ = −qᵀ P q` for a unit quaternion `q`.
pub fn cos_angle_from_form(q: &Quat, p: &Matrix4<f64>) -> f64 {
    let qv = q.as_vector();
    -(qv.transpose() * p * qv)[0]
}

/// Factor `F` with `FᵀF = I + P` (keep-in, `sign = +1`) or `I − P`
/// (keep-out, `sign = -1`), obtained from a symmetric eigendecomposition.
/// Eigenvalues below `-PSD_TOL` are a numerical failure; small negative ones
/// are clamped so the factor is rank-2 exactly.
pub fn factor_cone(p: &Matrix4<f64>, sign: f64) -> Result<Matrix4<f64>> {
    let s = if sign >= 0.0 { Matrix4::identity() + p } else { Matrix4::identity() - p };
    let eig = s.symmetric_eigen();
    let mut scaled_rows = Matrix4::zeros();
    for i in 0..4 {
        let lambda = eig.eigenvalues[i];
        if lambda < -PSD_TOL {
            return Err(Error::FactorizationFailure { min_eigenvalue: lambda });
        }
        let root = libm::sqrt(libm::fmax(lambda, 0.0));
        let row = eig.eigenvectors.column(i).transpose() * root;
        scaled_rows.row_mut(i).copy_from(&row);
    }
    Ok(scaled_rows)
}

/// Which side of the cone a factor encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// Instrument axis must stay within `θ_max` of the target: `‖Nq‖ ≤ rhs`.
    KeepIn,
    /// Instrument axis must stay at least `θ_min` away: `‖Mq‖ ≤ rhs`.
    KeepOut,
}

/// A fully built cone constraint for one node time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeFactor {
    pub kind: ConeKind,
    pub matrix: Matrix4<f64>,
    /// `√(1 − cos θ_max)` for keep-in, `√(1 + cos θ_min)` for keep-out.
    pub rhs: f64,
    /// Node time the factor applies to, seconds.
    pub target_time: f64,
}

impl ConeFactor {
    pub fn keep_in(r: &Vector3<f64>, nu: &Vector3<f64>, theta_max: f64, target_time: f64) -> Result<Self> {
        let p = pointing_matrix(r, nu)?;
        Ok(ConeFactor {
            kind: ConeKind::KeepIn,
            matrix: factor_cone(&p, 1.0)?,
            rhs: libm::sqrt(1.0 - libm::cos(theta_max)),
            target_time,
        })
    }

    pub fn keep_out(r: &Vector3<f64>, nu: &Vector3<f64>, theta_min: f64, target_time: f64) -> Result<Self> {
        let p = pointing_matrix(r, nu)?;
        Ok(ConeFactor {
            kind: ConeKind::KeepOut,
            matrix: factor_cone(&p, -1.0)?,
            rhs: libm::sqrt(1.0 + libm::cos(theta_min)),
            target_time,
        })
    }

    /// `‖matrix · q‖` for a state quaternion.
    pub fn norm_at(&self, q: &Quat) -> f64 {
        (self.matrix * q.as_vector()).norm()
    }

    pub fn satisfied(&self, q: &Quat) -> bool {
        self.norm_at(q) <= self.rhs
    }
}

/// Angle between the inertial direction `r` and the body axis `v` under
/// attitude `q`, in `[0, π]`. Evaluated by direct rotation; the quadratic
/// form is the optimization-side route and is checked against this one in
/// tests.
pub fn pointing_angle(q: &Quat, r_inertial: &Vector3<f64>, v_body: &Vector3<f64>) -> f64 {
    let qn = q.normalized();
    let r_body = rotate_by_quaternion(&qn, r_inertial).expect("normalized quaternion");
    let cos = libm::fmax(-1.0, libm::fmin(1.0, r_body.dot(v_body)));
    libm::acos(cos)
}
