//! Canonical conic-program container and the transcription of the guidance
//! subproblem into it.
//!
//! The canonical form is
//!
//! ```text
//!     minimize    cᵀ x
//!     subject to  A_eq x = b_eq
//!                 h − G x ∈ R₊^{m_l} × Q^{n_1} × … × Q^{n_m}
//! ```
//!
//! with the stacked variable `x_s = [x_k; u_k; γ_k; ζ_k; η_k; ρ_k; δ_{x,k};
//! δ_{u,k}]` per node. The sparsity pattern is built once; everything that
//! changes between solver calls (linearization blocks, reference values,
//! trust radii, cardinality weights) is written in place through precomputed
//! index maps.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::attitude::Quat;
use crate::discretize::DiscreteLtv;
use crate::error::{Error, Result};
use crate::linearize::CardinalityWeights;
use crate::pointing::{factor_cone, pointing_matrix};
use crate::scenario::Scenario;

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y += self * x`.
    pub fn mul_vec_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for idx in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowind[idx]] += self.values[idx] * xc;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.nrows];
        self.mul_vec_acc(x, &mut y);
        y
    }
}

/// Triplet accumulator that remembers where each pushed entry lands in the
/// final CSC value array, so dynamic updates can write values in place.
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    /// Returns the triplet id used to locate the entry after [`Self::build`].
    pub fn push(&mut self, row: usize, col: usize, value: f64) -> usize {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(value);
        self.rows.len() - 1
    }

    /// Build the CSC matrix and the triplet-id → value-index permutation.
    pub fn build(self) -> Result<(CscMatrix, Vec<usize>)> {
        let nnz = self.rows.len();
        let mut order: Vec<usize> = (0..nnz).collect();
        order.sort_by_key(|&i| (self.cols[i], self.rows[i]));
        for w in order.windows(2) {
            if self.cols[w[0]] == self.cols[w[1]] && self.rows[w[0]] == self.rows[w[1]] {
                return Err(Error::Construction(alloc::format!(
                    "duplicate sparse entry at ({}, {})",
                    self.rows[w[0]],
                    self.cols[w[0]]
                )));
            }
        }
        let mut colptr = alloc::vec![0usize; self.ncols + 1];
        let mut rowind = alloc::vec![0usize; nnz];
        let mut values = alloc::vec![0.0; nnz];
        let mut perm = alloc::vec![0usize; nnz];
        for (pos, &id) in order.iter().enumerate() {
            rowind[pos] = self.rows[id];
            values[pos] = self.vals[id];
            perm[id] = pos;
            colptr[self.cols[id] + 1] += 1;
        }
        for c in 0..self.ncols {
            colptr[c + 1] += colptr[c];
        }
        Ok((CscMatrix { nrows: self.nrows, ncols: self.ncols, colptr, rowind, values }, perm))
    }
}

/// Cone composition of the generalized inequality block: `nonneg` leading
/// rows in `R₊`, then second-order cones of the listed dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeLayout {
    pub nonneg: usize,
    pub soc_dims: Vec<usize>,
}

impl ConeLayout {
    pub fn total_rows(&self) -> usize {
        self.nonneg + self.soc_dims.iter().sum::<usize>()
    }
}

/// The assembled problem in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub cost: Vec<f64>,
    pub eq_mat: CscMatrix,
    pub eq_rhs: Vec<f64>,
    pub ineq_mat: CscMatrix,
    pub ineq_rhs: Vec<f64>,
    pub cones: ConeLayout,
}

/// Worst-case constraint residuals of a candidate primal point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub max_equality: f64,
    pub max_nonneg_violation: f64,
    pub max_soc_violation: f64,
}

impl ResidualReport {
    pub fn max_violation(&self) -> f64 {
        self.max_equality.max(self.max_nonneg_violation).max(self.max_soc_violation)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

impl ConicProblem {
    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    /// Residuals of `primal` against every constraint class.
    pub fn verify_solution(&self, primal: &[f64]) -> Result<ResidualReport> {
        if primal.len() != self.n_vars() {
            return Err(Error::DimensionMismatch { expected: self.n_vars(), actual: primal.len() });
        }
        let ax = self.eq_mat.mul_vec(primal);
        let mut max_eq = 0.0f64;
        for (i, &b) in self.eq_rhs.iter().enumerate() {
            max_eq = max_eq.max(libm::fabs(ax[i] - b));
        }

        let gx = self.ineq_mat.mul_vec(primal);
        let slack: Vec<f64> = self.ineq_rhs.iter().zip(&gx).map(|(h, g)| h - g).collect();
        let mut max_nonneg = 0.0f64;
        for &s in slack.iter().take(self.cones.nonneg) {
            max_nonneg = max_nonneg.max(-s);
        }
        let mut max_soc = 0.0f64;
        let mut row = self.cones.nonneg;
        for &dim in &self.cones.soc_dims {
            let t = slack[row];
            let mut b_sq = 0.0;
            for &s in slack.iter().skip(row + 1).take(dim - 1) {
                b_sq += s * s;
            }
            max_soc = max_soc.max(libm::sqrt(b_sq) - t);
            row += dim;
        }
        Ok(ResidualReport {
            max_equality: max_eq,
            max_nonneg_violation: max_nonneg.max(0.0),
            max_soc_violation: max_soc.max(0.0),
        })
    }

    /// Objective value at a primal point.
    pub fn objective(&self, primal: &[f64]) -> f64 {
        self.cost.iter().zip(primal).map(|(c, x)| c * x).sum()
    }

    /// Deterministic text serialization (dimensions, cone layout, triplets)
    /// for offline cross-checking.
    pub fn export_debug_text(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "conic-problem");
        let _ = writeln!(out, "variables {}", self.n_vars());
        let _ = writeln!(out, "equalities {} nnz {}", self.eq_mat.nrows, self.eq_mat.nnz());
        let _ = writeln!(out, "inequalities {} nnz {}", self.ineq_mat.nrows, self.ineq_mat.nnz());
        let mut cones = String::new();
        for d in &self.cones.soc_dims {
            let _ = write!(cones, " {d}");
        }
        let _ = writeln!(out, "cones nonneg {} soc{}", self.cones.nonneg, cones);
        for (i, c) in self.cost.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "c {i} {c:.17e}");
            }
        }
        for (label, mat) in [("A", &self.eq_mat), ("G", &self.ineq_mat)] {
            for col in 0..mat.ncols {
                for idx in mat.colptr[col]..mat.colptr[col + 1] {
                    let _ = writeln!(out, "{label} {} {col} {:.17e}", mat.rowind[idx], mat.values[idx]);
                }
            }
        }
        for (label, vec) in [("b", &self.eq_rhs), ("h", &self.ineq_rhs)] {
            for (i, v) in vec.iter().enumerate() {
                if *v != 0.0 {
                    let _ = writeln!(out, "{label} {i} {v:.17e}");
                }
            }
        }
        out
    }
}

/// Slice bookkeeping for the stacked per-node variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableLayout {
    pub n_nodes: usize,
    pub n_wheels: usize,
}

impl VariableLayout {
    pub fn n_x(&self) -> usize {
        7 + self.n_wheels
    }

    /// Per-node width: state, control and the six scalars γ ζ η ρ δx δu.
    pub fn node_dim(&self) -> usize {
        self.n_x() + self.n_wheels + 6
    }

    pub fn total_len(&self) -> usize {
        self.n_nodes * self.node_dim()
    }

    pub fn x_offset(&self, k: usize) -> usize {
        k * self.node_dim()
    }

    pub fn u_offset(&self, k: usize) -> usize {
        self.x_offset(k) + self.n_x()
    }

    pub fn gamma(&self, k: usize) -> usize {
        self.u_offset(k) + self.n_wheels
    }

    pub fn zeta(&self, k: usize) -> usize {
        self.gamma(k) + 1
    }

    pub fn eta(&self, k: usize) -> usize {
        self.gamma(k) + 2
    }

    pub fn rho(&self, k: usize) -> usize {
        self.gamma(k) + 3
    }

    pub fn delta_x(&self, k: usize) -> usize {
        self.gamma(k) + 4
    }

    pub fn delta_u(&self, k: usize) -> usize {
        self.gamma(k) + 5
    }

    pub fn node_state(&self, primal: &[f64], k: usize) -> DVector<f64> {
        DVector::from_column_slice(&primal[self.x_offset(k)..self.x_offset(k) + self.n_x()])
    }

    pub fn node_control(&self, primal: &[f64], k: usize) -> DVector<f64> {
        DVector::from_column_slice(&primal[self.u_offset(k)..self.u_offset(k) + self.n_wheels])
    }
}

/// Solver outcome classes every backend must map into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Converged to reduced accuracy; caller decides via residual check.
    Inaccurate,
    Infeasible,
    Unbounded,
    Timeout,
}

/// A backend's answer.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// Wall-clock seconds spent inside the backend.
    pub solve_time: f64,
}

/// Contract for conic solver backends. Warm starting is optional: backends
/// may ignore the hint.
pub trait SolverBackend {
    fn name(&self) -> &str;
    fn solve(&mut self, problem: &ConicProblem, warm_start: Option<&[f64]>) -> Result<SolveResult>;
}

struct IntervalSlots {
    a: Vec<usize>,
    b_minus: Vec<usize>,
    b_plus: Vec<usize>,
}

/// The guidance subproblem in canonical form with in-place update maps.
pub struct Transcription {
    problem: ConicProblem,
    layout: VariableLayout,
    interval_slots: Vec<IntervalSlots>,
    trust_x_rows: Vec<usize>,
    trust_u_rows: Vec<usize>,
    udev_rhs_start: Vec<usize>,
    xdev_rhs_start: Vec<usize>,
    /// Tightened scaled bound applied to the momentum and rate boxes.
    box_bound: f64,
}

impl Transcription {
    /// Build the static skeleton: sparsity patterns, cone factors, box and
    /// cone offsets. Entries that depend on the linearization are zero until
    /// the first [`Self::update_dynamic`].
    pub fn assemble_static(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let n = scenario.n_nodes;
        let n_w = scenario.n_wheels();
        let layout = VariableLayout { n_nodes: n, n_wheels: n_w };
        let n_x = layout.n_x();
        let n_vars = layout.total_len();

        // Tightening: momentum, rate and field-of-view limits shrink by the
        // configured fraction before transcription; torque keeps |u| ≤ 1.
        let margin = 1.0 - scenario.tightening;
        let theta_v = scenario.theta_vmax * margin;
        let theta_i = scenario.theta_imax * margin;
        let vis_rhs = libm::sqrt(1.0 - libm::cos(theta_v));
        let ir_rhs = libm::sqrt(1.0 - libm::cos(theta_i));
        let sun_rhs = libm::sqrt(1.0 + libm::cos(scenario.theta_sun));

        let times = scenario.times();
        let p_sun = pointing_matrix(&scenario.r_sun, &scenario.v_body)?;
        let sun_factor = factor_cone(&p_sun, -1.0)?;
        let mut comet_factors = Vec::with_capacity(n);
        for &t in &times {
            let p_comet = pointing_matrix(&scenario.comet_direction(t), &scenario.v_body)?;
            comet_factors.push(factor_cone(&p_comet, 1.0)?);
        }

        // Equality block: x_0 = x_init, then one affine map per interval.
        let n_eq = n * n_x;
        let mut eq = TripletBuilder::new(n_eq, n_vars);
        for i in 0..n_x {
            eq.push(i, layout.x_offset(0) + i, 1.0);
        }
        let mut interval_slots = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let row_base = (k + 1) * n_x;
            for i in 0..n_x {
                eq.push(row_base + i, layout.x_offset(k + 1) + i, 1.0);
            }
            let mut a = Vec::with_capacity(n_x * n_x);
            for c in 0..n_x {
                for r in 0..n_x {
                    a.push(eq.push(row_base + r, layout.x_offset(k) + c, 0.0));
                }
            }
            let mut b_minus = Vec::with_capacity(n_x * n_w);
            for c in 0..n_w {
                for r in 0..n_x {
                    b_minus.push(eq.push(row_base + r, layout.u_offset(k) + c, 0.0));
                }
            }
            let mut b_plus = Vec::with_capacity(n_x * n_w);
            for c in 0..n_w {
                for r in 0..n_x {
                    b_plus.push(eq.push(row_base + r, layout.u_offset(k + 1) + c, 0.0));
                }
            }
            interval_slots.push(IntervalSlots { a, b_minus, b_plus });
        }
        let (eq_mat, eq_perm) = eq.build()?;
        for slots in &mut interval_slots {
            for id in slots.a.iter_mut().chain(&mut slots.b_minus).chain(&mut slots.b_plus) {
                *id = eq_perm[*id];
            }
        }

        // Generalized inequality block: per-node nonnegative rows first,
        // then the per-node second-order cones.
        let nonneg_per_node = 2 + (4 * n_w + 6) + 2;
        let m_l = n * nonneg_per_node;
        let soc_per_node: usize = 20 + 2 * (n_w + 1) + (n_x + 1);
        let total_rows = m_l + n * soc_per_node;
        let mut g = TripletBuilder::new(total_rows, n_vars);
        let mut h = alloc::vec![0.0; total_rows];
        let mut trust_x_rows = Vec::with_capacity(n);
        let mut trust_u_rows = Vec::with_capacity(n);
        let mut udev_rhs_start = Vec::with_capacity(n);
        let mut xdev_rhs_start = Vec::with_capacity(n);

        for k in 0..n {
            let base = k * nonneg_per_node;
            // Slack nonnegativity.
            g.push(base, layout.gamma(k), -1.0);
            g.push(base + 1, layout.zeta(k), -1.0);
            // Torque box |u| ≤ 1 in scaled units.
            for i in 0..n_w {
                g.push(base + 2 + i, layout.u_offset(k) + i, -1.0);
                h[base + 2 + i] = 1.0;
                g.push(base + 2 + n_w + i, layout.u_offset(k) + i, 1.0);
                h[base + 2 + n_w + i] = 1.0;
            }
            // Momentum box, tightened.
            for i in 0..n_w {
                g.push(base + 2 + 2 * n_w + i, layout.x_offset(k) + 7 + i, -1.0);
                h[base + 2 + 2 * n_w + i] = margin;
                g.push(base + 2 + 3 * n_w + i, layout.x_offset(k) + 7 + i, 1.0);
                h[base + 2 + 3 * n_w + i] = margin;
            }
            // Rate box, tightened.
            for i in 0..3 {
                g.push(base + 2 + 4 * n_w + i, layout.x_offset(k) + 4 + i, -1.0);
                h[base + 2 + 4 * n_w + i] = margin;
                g.push(base + 2 + 4 * n_w + 3 + i, layout.x_offset(k) + 4 + i, 1.0);
                h[base + 2 + 4 * n_w + 3 + i] = margin;
            }
            // Trust-region caps; the rhs values are rewritten every solve.
            let tx = base + 2 + 4 * n_w + 6;
            g.push(tx, layout.delta_x(k), 1.0);
            trust_x_rows.push(tx);
            g.push(tx + 1, layout.delta_u(k), 1.0);
            trust_u_rows.push(tx + 1);
        }

        for k in 0..n {
            let mut row = m_l + k * soc_per_node;
            // Sun keep-out: [√(1+cos θ_sun); M q] ∈ Q⁵.
            h[row] = sun_rhs;
            for i in 0..4 {
                for j in 0..4 {
                    g.push(row + 1 + i, layout.x_offset(k) + j, -sun_factor[(i, j)]);
                }
            }
            row += 5;
            // Line-of-sight error: [η; N q] ∈ Q⁵.
            g.push(row, layout.eta(k), -1.0);
            for i in 0..4 {
                for j in 0..4 {
                    g.push(row + 1 + i, layout.x_offset(k) + j, -comet_factors[k][(i, j)]);
                }
            }
            row += 5;
            // Visual field of view: [√(1−cos θ̃_v) + γ; N q] ∈ Q⁵.
            h[row] = vis_rhs;
            g.push(row, layout.gamma(k), -1.0);
            for i in 0..4 {
                for j in 0..4 {
                    g.push(row + 1 + i, layout.x_offset(k) + j, -comet_factors[k][(i, j)]);
                }
            }
            row += 5;
            // Infrared field of view: [√(1−cos θ̃_i) + ζ; N q] ∈ Q⁵.
            h[row] = ir_rhs;
            g.push(row, layout.zeta(k), -1.0);
            for i in 0..4 {
                for j in 0..4 {
                    g.push(row + 1 + i, layout.x_offset(k) + j, -comet_factors[k][(i, j)]);
                }
            }
            row += 5;
            // Control energy: [ρ; u] ∈ Q^{n_w+1}.
            g.push(row, layout.rho(k), -1.0);
            for i in 0..n_w {
                g.push(row + 1 + i, layout.u_offset(k) + i, -1.0);
            }
            row += n_w + 1;
            // Control deviation: [δu; ū − u] ∈ Q^{n_w+1}; rhs carries ū.
            g.push(row, layout.delta_u(k), -1.0);
            udev_rhs_start.push(row + 1);
            for i in 0..n_w {
                g.push(row + 1 + i, layout.u_offset(k) + i, 1.0);
            }
            row += n_w + 1;
            // State deviation: [δx; x̄ − x] ∈ Q^{n_x+1}; rhs carries x̄.
            g.push(row, layout.delta_x(k), -1.0);
            xdev_rhs_start.push(row + 1);
            for i in 0..n_x {
                g.push(row + 1 + i, layout.x_offset(k) + i, 1.0);
            }
        }

        let (ineq_mat, _) = g.build()?;
        let mut soc_dims = Vec::with_capacity(n * 7);
        for _ in 0..n {
            soc_dims.extend_from_slice(&[5, 5, 5, 5, n_w + 1, n_w + 1, n_x + 1]);
        }
        let cones = ConeLayout { nonneg: m_l, soc_dims };
        debug_assert_eq!(cones.total_rows(), total_rows);

        Ok(Transcription {
            problem: ConicProblem {
                cost: alloc::vec![0.0; n_vars],
                eq_mat,
                eq_rhs: alloc::vec![0.0; n_eq],
                ineq_mat,
                ineq_rhs: h,
                cones,
            },
            layout,
            interval_slots,
            trust_x_rows,
            trust_u_rows,
            udev_rhs_start,
            xdev_rhs_start,
            box_bound: margin,
        })
    }

    pub fn problem(&self) -> &ConicProblem {
        &self.problem
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    /// Tightened scaled bound applied to the momentum and rate boxes.
    pub fn box_bound(&self) -> f64 {
        self.box_bound
    }

    /// Write everything that depends on the linearization trajectory: the
    /// interval matrices and offsets, the initial condition, the reference
    /// values inside the deviation cones, the cardinality-weighted cost and
    /// the trust radii.
    pub fn update_dynamic(
        &mut self,
        discrete: &DiscreteLtv,
        x_ref: &[DVector<f64>],
        u_ref: &[DVector<f64>],
        weights: &CardinalityWeights,
        trust: (f64, f64),
        beta: &[f64; 6],
    ) -> Result<()> {
        let n = self.layout.n_nodes;
        let n_x = self.layout.n_x();
        let n_w = self.layout.n_wheels;
        if discrete.interval_count() != n - 1 {
            return Err(Error::Construction(alloc::format!(
                "expected {} intervals, got {}",
                n - 1,
                discrete.interval_count()
            )));
        }
        if x_ref.len() != n || u_ref.len() != n || weights.node_count() != n {
            return Err(Error::Construction("reference length does not match the grid".into()));
        }

        for (k, (slots, m)) in self.interval_slots.iter().zip(&discrete.intervals).enumerate() {
            if m.a.nrows() != n_x || m.b_minus.ncols() != n_w {
                return Err(Error::Construction(alloc::format!("interval {k} has inconsistent dimensions")));
            }
            let values = &mut self.problem.eq_mat.values;
            for (slot, v) in slots.a.iter().zip(m.a.iter()) {
                values[*slot] = -v;
            }
            for (slot, v) in slots.b_minus.iter().zip(m.b_minus.iter()) {
                values[*slot] = -v;
            }
            for (slot, v) in slots.b_plus.iter().zip(m.b_plus.iter()) {
                values[*slot] = -v;
            }
            let row_base = (k + 1) * n_x;
            for i in 0..n_x {
                self.problem.eq_rhs[row_base + i] = m.s[i];
            }
        }
        // The reference starts at the (fixed) initial state.
        for i in 0..n_x {
            self.problem.eq_rhs[i] = x_ref[0][i];
        }

        for k in 0..n {
            for i in 0..n_w {
                self.problem.ineq_rhs[self.udev_rhs_start[k] + i] = u_ref[k][i];
            }
            for i in 0..n_x {
                self.problem.ineq_rhs[self.xdev_rhs_start[k] + i] = x_ref[k][i];
            }
            self.problem.cost[self.layout.gamma(k)] = beta[0] * weights.gamma_weights[k];
            self.problem.cost[self.layout.zeta(k)] = beta[1] * weights.zeta_weights[k];
            self.problem.cost[self.layout.eta(k)] = beta[2];
            self.problem.cost[self.layout.rho(k)] = beta[3];
            self.problem.cost[self.layout.delta_x(k)] = beta[4];
            self.problem.cost[self.layout.delta_u(k)] = beta[5];
        }
        self.set_trust_radii(trust.0, trust.1);
        Ok(())
    }

    /// Rewrite only the trust-region caps (the cheap inner-loop update).
    pub fn set_trust_radii(&mut self, delta_xmax: f64, delta_umax: f64) {
        for k in 0..self.layout.n_nodes {
            self.problem.ineq_rhs[self.trust_x_rows[k]] = delta_xmax;
            self.problem.ineq_rhs[self.trust_u_rows[k]] = delta_umax;
        }
    }

    /// Per-node scalar extraction from a primal vector.
    pub fn extract_scalars(&self, primal: &[f64]) -> NodeScalars {
        let n = self.layout.n_nodes;
        let mut out = NodeScalars {
            gamma: Vec::with_capacity(n),
            zeta: Vec::with_capacity(n),
            eta: Vec::with_capacity(n),
            rho: Vec::with_capacity(n),
            delta_x: Vec::with_capacity(n),
            delta_u: Vec::with_capacity(n),
        };
        for k in 0..n {
            out.gamma.push(primal[self.layout.gamma(k)]);
            out.zeta.push(primal[self.layout.zeta(k)]);
            out.eta.push(primal[self.layout.eta(k)]);
            out.rho.push(primal[self.layout.rho(k)]);
            out.delta_x.push(primal[self.layout.delta_x(k)]);
            out.delta_u.push(primal[self.layout.delta_u(k)]);
        }
        out
    }
}

/// Slack and deviation scalars per node, as returned by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScalars {
    pub gamma: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
    pub delta_x: Vec<f64>,
    pub delta_u: Vec<f64>,
}

/// Quaternion slice of a stacked node state.
pub fn node_quaternion(layout: &VariableLayout, primal: &[f64], k: usize) -> Quat {
    let off = layout.x_offset(k);
    Quat::new(primal[off], primal[off + 1], primal[off + 2], primal[off + 3])
}
