//! Analytic Jacobians of the scaled dynamics and the iterated-ℓ1 weights
//! that stand in for the cardinality objective.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::attitude::{cross_matrix, Quat, ScalingSet};
use crate::dynamics::{derivative, PlantModel};
use crate::error::{Error, Result};

/// `A(t) = ∇_x f` evaluated at a scaled reference state.
///
/// Block structure (`n_x = 7 + n_w`): the kinematic 4×4 block couples the
/// quaternion to itself through the reference body rate, the 4×3 block maps
/// scaled rate to quaternion rate, the 3×3 dynamic block carries gyroscopic
/// and wheel-momentum coupling, and the wheel rows are zero.
pub fn jacobian_a(x_ref: &DVector<f64>, plant: &PlantModel, scaling: &ScalingSet) -> DMatrix<f64> {
    let n_w = plant.n_wheels();
    let n_x = 7 + n_w;
    debug_assert_eq!(x_ref.len(), n_x);

    let q = Quat::new(x_ref[0], x_ref[1], x_ref[2], x_ref[3]);
    let omega = scaling.omega_from_scaled(x_ref);
    let h = scaling.h_from_scaled(x_ref);
    let j_inv = plant.inertia_inv();
    let l = &plant.torque_distribution;

    let mut a = DMatrix::zeros(n_x, n_x);

    // ∂q̇/∂q = ½ [[−[ω]×, ω]; [−ωᵀ, 0]].
    let wx = cross_matrix(&omega);
    for r in 0..3 {
        for c in 0..3 {
            a[(r, c)] = -0.5 * wx[(r, c)];
        }
        a[(r, 3)] = 0.5 * omega[r];
        a[(3, r)] = -0.5 * omega[r];
    }

    // ∂q̇/∂ω_scaled = ½ [[q_s I + [q_v]×]; [−q_vᵀ]] · W_ω⁻¹.
    let qv_cross = cross_matrix(&q.v);
    for c in 0..3 {
        let w_inv = scaling.omega_max[c];
        for r in 0..3 {
            let block = if r == c { q.s } else { 0.0 } + qv_cross[(r, c)];
            a[(r, 4 + c)] = 0.5 * block * w_inv;
        }
        a[(3, 4 + c)] = -0.5 * q.v[c] * w_inv;
    }

    // ∂ω̇_scaled/∂ω_scaled = W_ω J⁻¹([Jω]× − [ω]×J + [Lh]×) W_ω⁻¹.
    let mut lh = nalgebra::Vector3::zeros();
    for jw in 0..n_w {
        for i in 0..3 {
            lh[i] += l[(i, jw)] * h[jw];
        }
    }
    let core_block = j_inv * (cross_matrix(&(plant.inertia * omega)) - cross_matrix(&omega) * plant.inertia + cross_matrix(&lh));
    for r in 0..3 {
        for c in 0..3 {
            a[(4 + r, 4 + c)] = core_block[(r, c)] / scaling.omega_max[r] * scaling.omega_max[c];
        }
    }

    // ∂ω̇_scaled/∂h_scaled = −W_ω J⁻¹ [ω]× L W_h⁻¹.
    let coupling = -(j_inv * cross_matrix(&omega)) * l;
    for r in 0..3 {
        for c in 0..n_w {
            a[(4 + r, 7 + c)] = coupling[(r, c)] / scaling.omega_max[r] * scaling.h_max[c];
        }
    }

    a
}

/// `B = ∇_u f`, independent of the reference:
/// `[0; −W_ω J⁻¹ L W_τ⁻¹; W_h W_τ⁻¹]`.
pub fn jacobian_b(plant: &PlantModel, scaling: &ScalingSet) -> DMatrix<f64> {
    let n_w = plant.n_wheels();
    let n_x = 7 + n_w;
    let mut b = DMatrix::zeros(n_x, n_w);
    let torque_map = -(plant.inertia_inv() * &plant.torque_distribution);
    for r in 0..3 {
        for c in 0..n_w {
            b[(4 + r, c)] = torque_map[(r, c)] / scaling.omega_max[r] * scaling.tau_max[c];
        }
    }
    for c in 0..n_w {
        b[(7 + c, c)] = scaling.tau_max[c] / scaling.h_max[c];
    }
    b
}

/// Affine term that makes the linearization exact at the reference:
/// `s = f(x̄, ū) − A x̄ − B ū`, so `A x̄ + B ū + s = f(x̄, ū)` identically.
pub fn taylor_offset(
    t: f64,
    x_ref: &DVector<f64>,
    u_ref: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    plant: &PlantModel,
    scaling: &ScalingSet,
) -> DVector<f64> {
    let mut s = derivative(t, x_ref, u_ref, plant, scaling);
    s.gemv(-1.0, a, x_ref, 1.0);
    s.gemv(-1.0, b, u_ref, 1.0);
    s
}

/// One iterated-ℓ1 weight: `1 / (ε + previous value)`.
pub fn card_weight(value_prev: f64, epsilon: f64) -> Result<f64> {
    if value_prev < 0.0 {
        return Err(Error::invalid("cardinality surrogate value must be nonnegative"));
    }
    Ok(1.0 / (epsilon + value_prev))
}

/// Default regularizer for the cardinality surrogate.
pub const CARD_EPSILON: f64 = 1e-3;

/// Per-node weights for the visual and infrared cardinality surrogates.
#[derive(Debug, Clone, PartialEq)]
pub struct CardinalityWeights {
    pub gamma_weights: Vec<f64>,
    pub zeta_weights: Vec<f64>,
    pub epsilon: f64,
}

impl CardinalityWeights {
    /// Weights from the previous iteration's slack values.
    pub fn from_previous(gamma_prev: &[f64], zeta_prev: &[f64], epsilon: f64) -> Result<Self> {
        if gamma_prev.len() != zeta_prev.len() {
            return Err(Error::DimensionMismatch { expected: gamma_prev.len(), actual: zeta_prev.len() });
        }
        Ok(CardinalityWeights {
            gamma_weights: gamma_prev.iter().map(|&g| card_weight(g, epsilon)).collect::<Result<_>>()?,
            zeta_weights: zeta_prev.iter().map(|&z| card_weight(z, epsilon)).collect::<Result<_>>()?,
            epsilon,
        })
    }

    /// First-iteration weights: previous values set to one.
    pub fn unit(n_nodes: usize, epsilon: f64) -> Self {
        let w = 1.0 / (epsilon + 1.0);
        CardinalityWeights {
            gamma_weights: alloc::vec![w; n_nodes],
            zeta_weights: alloc::vec![w; n_nodes],
            epsilon,
        }
    }

    pub fn node_count(&self) -> usize {
        self.gamma_weights.len()
    }
}
