//! The sequential convex programming loop: linearize and discretize around a
//! reference, solve the conic subproblem, re-propagate the nonlinear
//! dynamics, accept or reject against the feasibility metric, and repeat
//! until the solution stops moving.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::attitude::{ScalingSet, Trajectory};
use crate::conic::{NodeScalars, SolveStatus, SolverBackend, Transcription};
use crate::discretize::{discretize_nodes, DiscreteLtv};
use crate::dynamics::{propagate_nodes, PlantModel};
use crate::error::{Error, Result};
use crate::linearize::{CardinalityWeights, CARD_EPSILON};
use crate::ode::IntegratorSettings;
use crate::pointing::{factor_cone, pointing_angle, pointing_matrix};
use crate::scenario::{evaluate_outages, OutageMetrics, Scenario};

/// Monotonic time source. The loop only compares differences, so any origin
/// works; the null clock disables both the time limit and step timings.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Clock that always reads zero (for `no_std` hosts and tests).
pub struct NullClock;

impl Clock for NullClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Loop tuning. Defaults carry the benchmark values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScpConfig {
    /// Maximum outer iterations.
    pub max_iterations: usize,
    /// Maximum solve attempts per outer iteration.
    pub max_rejections: usize,
    /// Initial trust radii in scaled units (state, control).
    pub initial_trust_x: f64,
    pub initial_trust_u: f64,
    /// Expansion factor applied on acceptance, ≥ 1.
    pub kappa_expand: f64,
    /// Contraction factor applied on rejection, in (0, 1].
    pub kappa_contract: f64,
    /// Feasibility threshold ε_max on the summed node gap.
    pub feasibility_threshold: f64,
    /// Convergence threshold on Σ(δ_x + δ_u).
    pub convergence_threshold: f64,
    /// Wall-clock budget, seconds.
    pub time_limit: f64,
    /// Regularizer of the cardinality surrogate weights.
    pub card_epsilon: f64,
    /// Quadrature tolerances for linearization/discretization.
    pub linearize_settings: IntegratorSettings,
    /// Tolerances for truth propagation.
    pub truth_settings: IntegratorSettings,
    /// Residual bound for salvaging reduced-accuracy solver returns.
    pub inaccurate_residual_tol: f64,
}

impl Default for ScpConfig {
    fn default() -> Self {
        ScpConfig {
            max_iterations: 30,
            max_rejections: 20,
            initial_trust_x: 0.1,
            initial_trust_u: 0.1,
            kappa_expand: 2.0,
            kappa_contract: 0.25,
            feasibility_threshold: 0.5,
            convergence_threshold: 1e-2,
            time_limit: f64::INFINITY,
            card_epsilon: CARD_EPSILON,
            linearize_settings: IntegratorSettings::loose(),
            truth_settings: IntegratorSettings::tight(),
            inaccurate_residual_tol: 1e-5,
        }
    }
}

impl ScpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_rejections == 0 {
            return Err(Error::invalid("iteration limits must be at least one"));
        }
        if !(self.kappa_expand >= 1.0) {
            return Err(Error::invalid("expansion factor must be at least one"));
        }
        if !(self.kappa_contract > 0.0 && self.kappa_contract <= 1.0) {
            return Err(Error::invalid("contraction factor must lie in (0, 1]"));
        }
        for (name, v) in [
            ("initial state trust radius", self.initial_trust_x),
            ("initial control trust radius", self.initial_trust_u),
            ("feasibility threshold", self.feasibility_threshold),
            ("convergence threshold", self.convergence_threshold),
            ("time limit", self.time_limit),
            ("cardinality regularizer", self.card_epsilon),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(alloc::format!("{name} must be positive")));
            }
        }
        self.linearize_settings.validate()?;
        self.truth_settings.validate()?;
        Ok(())
    }
}

/// Summed node-wise gap between the convex solution and its nonlinear
/// re-propagation.
pub fn feasibility_metric(x_convex: &[DVector<f64>], x_true: &[DVector<f64>]) -> f64 {
    debug_assert_eq!(x_convex.len(), x_true.len());
    x_convex.iter().zip(x_true).map(|(a, b)| (a - b).norm()).sum()
}

/// Trust-region policy: accept iff the metric does not exceed the threshold;
/// expand on acceptance, contract on rejection.
pub fn trust_region_update(eps_x: f64, radii: (f64, f64), config: &ScpConfig) -> ((f64, f64), bool) {
    if eps_x > config.feasibility_threshold {
        ((radii.0 * config.kappa_contract, radii.1 * config.kappa_contract), false)
    } else {
        ((radii.0 * config.kappa_expand, radii.1 * config.kappa_expand), true)
    }
}

/// Why the loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationLimit,
    RejectionLimit,
    TimeLimit,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::IterationLimit => "iter-limit",
            Termination::RejectionLimit => "rejection-limit",
            Termination::TimeLimit => "time-limit",
        }
    }
}

/// One solve attempt in the trace.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Outer iteration, 1-based.
    pub iteration: usize,
    /// Inner attempt within the iteration, 1-based.
    pub attempt: usize,
    pub status: SolveStatus,
    /// Feasibility metric of the attempt; NaN when the solver returned no
    /// usable primal.
    pub eps_x: f64,
    pub objective: f64,
    /// Trust radii used for this attempt.
    pub delta_xmax: f64,
    pub delta_umax: f64,
    pub accepted: bool,
    pub solve_time_s: f64,
    pub lin_time_s: f64,
    pub int_time_s: f64,
}

/// Mutable loop state: the linearization reference and everything the
/// update policy touches.
pub struct ScpState {
    /// Scaled node states of the reference (always dynamically feasible:
    /// produced by nonlinear propagation).
    pub x_ref: Vec<DVector<f64>>,
    /// Scaled node controls of the reference.
    pub u_ref: Vec<DVector<f64>>,
    /// Previous visual/infrared slack values feeding the reweighting.
    pub gamma_prev: Vec<f64>,
    pub zeta_prev: Vec<f64>,
    pub trust_x: f64,
    pub trust_u: f64,
    pub outer_iterations: usize,
    pub total_solves: usize,
    pub history: Vec<IterationRecord>,
}

/// The returned guidance profile.
#[derive(Debug, Clone)]
pub struct GuidanceSolution {
    /// Truth-propagated states with the first-order-hold controls, physical
    /// units.
    pub trajectory: Trajectory,
    /// Scaled node states/controls (the internal representation).
    pub x_nodes: Vec<DVector<f64>>,
    pub u_nodes: Vec<DVector<f64>>,
    /// Per-node slack and deviation scalars of the last accepted solve.
    pub scalars: NodeScalars,
    pub outages: OutageMetrics,
    pub termination: Termination,
    pub iterations: Vec<IterationRecord>,
    pub outer_iterations: usize,
    /// Feasibility metric of the last accepted solve (NaN if none).
    pub final_feasibility: f64,
    /// Σ(δ_x + δ_u) of the last accepted solve (NaN if none).
    pub final_convergence: f64,
    /// Objective of the last accepted solve (NaN if none).
    pub objective: f64,
    /// Per-call wall-clock durations, seconds (empty under the null clock).
    pub lin_times: Vec<f64>,
    pub opt_times: Vec<f64>,
    pub int_times: Vec<f64>,
    /// Comet pointing angle at every node, radians: first the initial
    /// reference, then one trace per accepted iteration.
    pub angle_history: Vec<Vec<f64>>,
}

impl GuidanceSolution {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Slack scalars recomputed from a reference trajectory (used when the loop
/// returns before any solve was accepted).
fn scalars_from_reference(scenario: &Scenario, x_ref: &[DVector<f64>], u_ref: &[DVector<f64>]) -> Result<NodeScalars> {
    let margin = 1.0 - scenario.tightening;
    let vis_rhs = libm::sqrt(1.0 - libm::cos(scenario.theta_vmax * margin));
    let ir_rhs = libm::sqrt(1.0 - libm::cos(scenario.theta_imax * margin));
    let times = scenario.times();
    let n = times.len();
    let mut s = NodeScalars {
        gamma: Vec::with_capacity(n),
        zeta: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        rho: Vec::with_capacity(n),
        delta_x: alloc::vec![0.0; n],
        delta_u: alloc::vec![0.0; n],
    };
    for (k, &t) in times.iter().enumerate() {
        let p = pointing_matrix(&scenario.comet_direction(t), &scenario.v_body)?;
        let n_fac = factor_cone(&p, 1.0)?;
        let q = nalgebra::Vector4::new(x_ref[k][0], x_ref[k][1], x_ref[k][2], x_ref[k][3]);
        let nq = (n_fac * q).norm();
        s.gamma.push((nq - vis_rhs).max(0.0));
        s.zeta.push((nq - ir_rhs).max(0.0));
        s.eta.push(nq);
        s.rho.push(u_ref[k].norm());
    }
    Ok(s)
}

/// Comet pointing angle at every node of a scaled reference.
fn node_angles(scenario: &Scenario, times: &[f64], x_nodes: &[DVector<f64>]) -> Vec<f64> {
    times
        .iter()
        .zip(x_nodes)
        .map(|(&t, x)| {
            let q = crate::attitude::Quat::new(x[0], x[1], x[2], x[3]);
            pointing_angle(&q, &scenario.comet_direction(t), &scenario.v_body)
        })
        .collect()
}

/// Signature of the per-iteration discretization step, pluggable so hosts
/// can substitute a parallel interval map with identical results.
pub type DiscretizeFn = fn(
    &[DVector<f64>],
    &[DVector<f64>],
    &[f64],
    &PlantModel,
    &ScalingSet,
    &IntegratorSettings,
) -> Result<DiscreteLtv>;

/// Run the full sequential loop on a scenario. Every termination path
/// returns the last accepted (dynamically feasible) reference.
pub fn run_scp(scenario: &Scenario, backend: &mut dyn SolverBackend, clock: &dyn Clock) -> Result<GuidanceSolution> {
    run_scp_with(scenario, backend, clock, discretize_nodes)
}

/// [`run_scp`] with an explicit discretization routine.
pub fn run_scp_with(
    scenario: &Scenario,
    backend: &mut dyn SolverBackend,
    clock: &dyn Clock,
    discretizer: DiscretizeFn,
) -> Result<GuidanceSolution> {
    scenario.validate()?;
    let config = &scenario.scp;
    let times = scenario.times();
    let n = times.len();
    let n_w = scenario.n_wheels();
    let x0 = scenario.scaling.scale_state(&scenario.x_init)?;

    // Null-torque initialization: propagate the free drift and set the
    // cardinality linearization values to one.
    let mut state = ScpState {
        u_ref: (0..n).map(|_| DVector::zeros(n_w)).collect(),
        x_ref: Vec::new(),
        gamma_prev: alloc::vec![1.0; n],
        zeta_prev: alloc::vec![1.0; n],
        trust_x: config.initial_trust_x,
        trust_u: config.initial_trust_u,
        outer_iterations: 0,
        total_solves: 0,
        history: Vec::new(),
    };
    state.x_ref = propagate_nodes(&x0, &times, &state.u_ref, &scenario.plant, &scenario.scaling, &config.truth_settings)?;

    let mut transcription = Transcription::assemble_static(scenario)?;
    let start = clock.now();
    let mut warm_start: Option<Vec<f64>> = None;
    let mut last_accepted: Option<(NodeScalars, f64, f64)> = None; // scalars, eps_x, objective
    let mut lin_times = Vec::new();
    let mut opt_times = Vec::new();
    let mut int_times = Vec::new();
    let mut angle_history = alloc::vec![node_angles(scenario, &times, &state.x_ref)];

    let mut termination = Termination::IterationLimit;

    'outer: for iteration in 1..=config.max_iterations {
        state.outer_iterations = iteration;

        let t_lin = clock.now();
        let ltv = discretizer(
            &state.x_ref,
            &state.u_ref,
            &times,
            &scenario.plant,
            &scenario.scaling,
            &config.linearize_settings,
        )?;
        let lin_time = clock.now() - t_lin;
        lin_times.push(lin_time);

        let weights = CardinalityWeights::from_previous(&state.gamma_prev, &state.zeta_prev, config.card_epsilon)?;
        transcription.update_dynamic(
            &ltv,
            &state.x_ref,
            &state.u_ref,
            &weights,
            (state.trust_x, state.trust_u),
            &scenario.beta,
        )?;

        let mut accepted_this_iteration = false;
        for attempt in 1..=config.max_rejections {
            transcription.set_trust_radii(state.trust_x, state.trust_u);

            let t_solve = clock.now();
            let result = backend.solve(transcription.problem(), warm_start.as_deref())?;
            let solve_time = clock.now() - t_solve;
            opt_times.push(solve_time);
            state.total_solves += 1;

            let mut record = IterationRecord {
                iteration,
                attempt,
                status: result.status,
                eps_x: f64::NAN,
                objective: result.objective,
                delta_xmax: state.trust_x,
                delta_umax: state.trust_u,
                accepted: false,
                solve_time_s: solve_time,
                lin_time_s: if attempt == 1 { lin_time } else { 0.0 },
                int_time_s: 0.0,
            };

            let usable = match result.status {
                SolveStatus::Optimal => true,
                SolveStatus::Inaccurate => transcription
                    .problem()
                    .verify_solution(&result.primal)
                    .map(|r| r.within(config.inaccurate_residual_tol))
                    .unwrap_or(false),
                SolveStatus::Infeasible | SolveStatus::Unbounded | SolveStatus::Timeout => false,
            };

            if usable {
                warm_start = Some(result.primal.clone());
                let layout = *transcription.layout();
                let x_sol: Vec<DVector<f64>> = (0..n).map(|k| layout.node_state(&result.primal, k)).collect();
                let u_sol: Vec<DVector<f64>> = (0..n).map(|k| layout.node_control(&result.primal, k)).collect();

                let t_int = clock.now();
                let x_true =
                    propagate_nodes(&x0, &times, &u_sol, &scenario.plant, &scenario.scaling, &config.truth_settings)?;
                let int_time = clock.now() - t_int;
                int_times.push(int_time);
                record.int_time_s = int_time;

                let eps_x = feasibility_metric(&x_sol, &x_true);
                record.eps_x = eps_x;
                let ((tx, tu), accept) = trust_region_update(eps_x, (state.trust_x, state.trust_u), config);
                state.trust_x = tx;
                state.trust_u = tu;

                if accept {
                    let scalars = transcription.extract_scalars(&result.primal);
                    state.gamma_prev = scalars.gamma.iter().map(|&g| g.max(0.0)).collect();
                    state.zeta_prev = scalars.zeta.iter().map(|&z| z.max(0.0)).collect();
                    angle_history.push(node_angles(scenario, &times, &x_true));
                    state.x_ref = x_true;
                    state.u_ref = u_sol;
                    last_accepted = Some((scalars, eps_x, result.objective));
                    record.accepted = true;
                    state.history.push(record);
                    accepted_this_iteration = true;
                    break;
                }
            } else {
                // Failed or untrusted solve: contract and retry.
                state.trust_x *= config.kappa_contract;
                state.trust_u *= config.kappa_contract;
            }
            state.history.push(record);

            if clock.now() - start > config.time_limit {
                termination = Termination::TimeLimit;
                break 'outer;
            }
            if attempt == config.max_rejections {
                termination = Termination::RejectionLimit;
                break 'outer;
            }
        }

        if accepted_this_iteration {
            let (scalars, _, _) = last_accepted.as_ref().expect("accepted iterate recorded");
            let total_deviation: f64 =
                scalars.delta_x.iter().sum::<f64>() + scalars.delta_u.iter().sum::<f64>();
            if total_deviation <= config.convergence_threshold {
                termination = Termination::Converged;
                break 'outer;
            }
        }
        if clock.now() - start > config.time_limit {
            termination = Termination::TimeLimit;
            break 'outer;
        }
        if iteration == config.max_iterations {
            termination = Termination::IterationLimit;
            break 'outer;
        }
    }

    let (scalars, final_feasibility, objective) = match last_accepted {
        Some((s, e, o)) => (s, e, o),
        None => (scalars_from_reference(scenario, &state.x_ref, &state.u_ref)?, f64::NAN, f64::NAN),
    };
    let final_convergence =
        scalars.delta_x.iter().sum::<f64>() + scalars.delta_u.iter().sum::<f64>();

    let trajectory = Trajectory::from_scaled(times, &state.x_ref, &state.u_ref, &scenario.scaling)?;
    let outages = evaluate_outages(&trajectory, scenario);

    Ok(GuidanceSolution {
        trajectory,
        x_nodes: state.x_ref,
        u_nodes: state.u_ref,
        scalars,
        outages,
        termination,
        iterations: state.history,
        outer_iterations: state.outer_iterations,
        final_feasibility,
        final_convergence: if final_convergence.is_finite() { final_convergence } else { f64::NAN },
        objective,
        lin_times,
        opt_times,
        int_times,
        angle_history,
    })
}
