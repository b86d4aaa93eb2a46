//! Benchmark scenario definition: flyby geometry, wheel assembly, fault
//! injection, dust-impact momentum sampling and science-outage metrics.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand_core::{RngCore, SeedableRng};

use crate::attitude::{uniform_grid, Quat, ScalingSet, SpacecraftState, Trajectory};
use crate::dynamics::PlantModel;
use crate::error::{Error, Result};
use crate::pointing::pointing_angle;
use crate::scp::ScpConfig;

/// Straight-line relative motion of the target in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearEphemeris {
    /// Position of the target relative to the spacecraft at `t = 0`, km.
    pub p0_km: Vector3<f64>,
    /// Relative velocity, km/s.
    pub v_kmps: Vector3<f64>,
}

impl LinearEphemeris {
    pub fn position_km(&self, t: f64) -> Vector3<f64> {
        self.p0_km + self.v_kmps * t
    }

    pub fn range_km(&self, t: f64) -> f64 {
        self.position_km(t).norm()
    }

    /// Unit vector from the spacecraft to the target.
    pub fn direction(&self, t: f64) -> Vector3<f64> {
        self.position_km(t).normalize()
    }
}

/// Everything a guidance run needs: geometry, plant, limits, weights, loop
/// tuning.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Flyby duration, s.
    pub t_f: f64,
    /// Number of grid nodes `N`.
    pub n_nodes: usize,
    pub ephemeris: LinearEphemeris,
    /// Sun direction in the inertial frame (unit).
    pub r_sun: Vector3<f64>,
    /// Instrument boresight in the body frame (unit).
    pub v_body: Vector3<f64>,
    /// Visual field-of-view half angle, rad.
    pub theta_vmax: f64,
    /// Infrared field-of-view half angle, rad.
    pub theta_imax: f64,
    /// Sun exclusion half angle, rad.
    pub theta_sun: f64,
    pub x_init: SpacecraftState,
    pub plant: PlantModel,
    pub scaling: ScalingSet,
    /// Objective weights: visual outage, infrared outage, line-of-sight
    /// error, control energy, state deviation, control deviation.
    pub beta: [f64; 6],
    /// Fractional constraint tightening applied to momentum, rate and
    /// field-of-view limits before transcription (intersample margin).
    pub tightening: f64,
    pub scp: ScpConfig,
}

impl Scenario {
    /// Unit vector from the spacecraft to the comet at time `t`.
    pub fn comet_direction(&self, t: f64) -> Vector3<f64> {
        self.ephemeris.direction(t)
    }

    /// The uniform node grid.
    pub fn times(&self) -> Vec<f64> {
        uniform_grid(self.t_f, self.n_nodes)
    }

    pub fn node_spacing(&self) -> f64 {
        self.t_f / (self.n_nodes - 1) as f64
    }

    pub fn n_wheels(&self) -> usize {
        self.plant.n_wheels()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::invalid("need at least two grid nodes"));
        }
        if !(self.t_f > 0.0) {
            return Err(Error::invalid("flyby duration must be positive"));
        }
        for (name, angle) in [
            ("visual field of view", self.theta_vmax),
            ("infrared field of view", self.theta_imax),
            ("sun exclusion", self.theta_sun),
        ] {
            if !(angle > 0.0 && angle < core::f64::consts::PI) {
                return Err(Error::invalid(alloc::format!("{name} angle must lie in (0, π)")));
            }
        }
        if !(self.tightening >= 0.0 && self.tightening < 1.0) {
            return Err(Error::invalid("tightening fraction must lie in [0, 1)"));
        }
        if libm::fabs(self.r_sun.norm() - 1.0) > 1e-9 || libm::fabs(self.v_body.norm() - 1.0) > 1e-9 {
            return Err(Error::invalid("sun and boresight directions must be unit vectors"));
        }
        if self.plant.n_wheels() != self.scaling.n_wheels() {
            return Err(Error::DimensionMismatch {
                expected: self.plant.n_wheels(),
                actual: self.scaling.n_wheels(),
            });
        }
        if self.ephemeris.p0_km.norm() == 0.0 {
            return Err(Error::invalid("ephemeris must not start at zero range"));
        }
        // The initial state must respect the tightened box constraints the
        // transcription will impose at the first node.
        let margin = 1.0 - self.tightening;
        let x0 = &self.x_init;
        if x0.h_wheels.len() != self.plant.n_wheels() {
            return Err(Error::DimensionMismatch { expected: self.plant.n_wheels(), actual: x0.h_wheels.len() });
        }
        for i in 0..x0.h_wheels.len() {
            if libm::fabs(x0.h_wheels[i]) > margin * self.scaling.h_max[i] + 1e-12 {
                return Err(Error::invalid("initial wheel momentum violates the tightened limit"));
            }
        }
        for i in 0..3 {
            if libm::fabs(x0.omega[i]) > margin * self.scaling.omega_max[i] + 1e-12 {
                return Err(Error::invalid("initial body rate violates the tightened limit"));
            }
        }
        self.scp.validate()?;
        Ok(())
    }
}

/// Benchmark wheel geometry: four wheels in a pyramid tilted along the body
/// y axis.
pub fn pyramid_distribution() -> DMatrix<f64> {
    let s6 = libm::sqrt(6.0);
    DMatrix::from_row_slice(3, 4, &[1.0, -1.0, -1.0, 1.0, s6, s6, s6, s6, 1.0, 1.0, -1.0, -1.0])
        * (libm::sqrt(2.0) / 4.0)
}

/// Named preset understood by the config loader.
pub const BENCHMARK_PRESET: &str = "comet-interceptor";

/// Build the benchmark scenario, optionally with one wheel failed
/// (`fault` is the 1-based wheel index) and with the given initial wheel
/// momenta for the active wheels.
pub fn build_benchmark(fault: Option<usize>, h0: &DVector<f64>) -> Result<Scenario> {
    let inertia = Matrix3::new(225.0, 10.0, -10.0, 10.0, 128.0, 10.0, -10.0, 10.0, 223.0);
    let full_l = pyramid_distribution();

    let (plant, n_w) = match fault {
        None => (PlantModel::new(inertia, full_l)?, 4),
        Some(idx) => {
            if !(1..=4).contains(&idx) {
                return Err(Error::invalid("fault index must name one of the four wheels"));
            }
            (PlantModel::new(inertia, full_l.remove_column(idx - 1))?, 3)
        }
    };

    if h0.len() != n_w {
        return Err(Error::DimensionMismatch { expected: n_w, actual: h0.len() });
    }

    let h_max = DVector::from_element(n_w, 3.2);
    let tau_max = DVector::from_element(n_w, 0.172);
    // The rate limit is listed as a bare 5 per axis; interpreted as deg/s.
    let omega_max = Vector3::from_element(5.0f64.to_radians());
    let scaling = ScalingSet::new(omega_max, h_max.clone(), tau_max)?;

    for i in 0..n_w {
        if libm::fabs(h0[i]) > 0.9 * h_max[i] + 1e-12 {
            return Err(Error::invalid("initial momentum must lie within 90% of the wheel limit"));
        }
    }

    let scenario = Scenario {
        t_f: 200.0,
        n_nodes: 40,
        ephemeris: LinearEphemeris {
            p0_km: Vector3::new(7000.0, -1000.0, 0.0),
            v_kmps: Vector3::new(-70.0, 0.0, 0.0),
        },
        r_sun: Vector3::new(0.0, 0.0, -1.0),
        v_body: Vector3::new(1.0, 0.0, 0.0),
        theta_vmax: 0.46f64.to_radians(),
        theta_imax: 5.0f64.to_radians(),
        theta_sun: 60.0f64.to_radians(),
        x_init: SpacecraftState {
            q: Quat::new(-0.7, 0.05, -0.05, 0.7).normalized(),
            omega: Vector3::zeros(),
            h_wheels: h0.clone(),
        },
        plant,
        scaling,
        beta: [1.0, 1.0, 0.1, 0.01, 0.1, 0.1],
        tightening: 0.03,
        scp: ScpConfig::default(),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Uniform sampler over the dust-impact momentum set
/// `H = {h : |h_i| ≤ bounds_i}` with counter-based substreams: run `i`
/// always sees the same draw regardless of scheduling.
#[derive(Debug, Clone)]
pub struct MomentumSampler {
    pub bounds: DVector<f64>,
    pub seed: u64,
}

impl MomentumSampler {
    /// Bounds at 90% of each wheel's momentum limit.
    pub fn new(h_max: &DVector<f64>, seed: u64) -> Self {
        MomentumSampler { bounds: h_max * 0.9, seed }
    }

    pub fn sample(&self, run_index: u64) -> DVector<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run_index);
        DVector::from_fn(self.bounds.len(), |i, _| {
            // 53-bit uniform in [0, 1), mapped to [-b, b].
            let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            (2.0 * unit - 1.0) * self.bounds[i]
        })
    }
}

/// Science-outage accounting over a node grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageMetrics {
    pub visual_outage_s: f64,
    pub infrared_outage_s: f64,
    pub max_pointing_error_rad: f64,
    pub visual_violation_nodes: usize,
    pub infrared_violation_nodes: usize,
}

impl OutageMetrics {
    pub fn zero_outage(&self) -> bool {
        self.visual_violation_nodes == 0 && self.infrared_violation_nodes == 0
    }
}

/// Count nodes whose comet pointing angle exceeds the (untightened) camera
/// limits and convert the counts to seconds of outage.
pub fn evaluate_outages(trajectory: &Trajectory, scenario: &Scenario) -> OutageMetrics {
    let samples: Vec<(f64, Quat)> = trajectory.times.iter().zip(&trajectory.states).map(|(&t, s)| (t, s.q)).collect();
    let dt = scenario.node_spacing();
    outages_from_samples(&samples, scenario, dt)
}

/// Same accounting over arbitrary attitude samples with the given per-sample
/// time weight (used by the supersampled diagnostic).
pub fn outages_from_samples(samples: &[(f64, Quat)], scenario: &Scenario, dt_weight: f64) -> OutageMetrics {
    let mut visual = 0usize;
    let mut infrared = 0usize;
    let mut max_err: f64 = 0.0;
    for (t, q) in samples {
        let angle = pointing_angle(q, &scenario.comet_direction(*t), &scenario.v_body);
        max_err = libm::fmax(max_err, angle);
        if angle > scenario.theta_vmax {
            visual += 1;
        }
        if angle > scenario.theta_imax {
            infrared += 1;
        }
    }
    OutageMetrics {
        visual_outage_s: visual as f64 * dt_weight,
        infrared_outage_s: infrared as f64 * dt_weight,
        max_pointing_error_rad: max_err,
        visual_violation_nodes: visual,
        infrared_violation_nodes: infrared,
    }
}

/// Images of all `±h_max` corner combinations under `L`: the vertices whose
/// convex hull is the achievable body-frame momentum set.
pub fn momentum_envelope_vertices(plant: &PlantModel, h_max: &DVector<f64>) -> Vec<Vector3<f64>> {
    let n_w = plant.n_wheels();
    let mut vertices = Vec::with_capacity(1 << n_w);
    for mask in 0..(1u32 << n_w) {
        let mut v = Vector3::zeros();
        for j in 0..n_w {
            let sign = if mask & (1 << j) != 0 { 1.0 } else { -1.0 };
            for i in 0..3 {
                v[i] += plant.torque_distribution[(i, j)] * sign * h_max[j];
            }
        }
        vertices.push(v);
    }
    vertices
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn comet_direction_key_epochs() {
        let s = build_benchmark(None, &DVector::zeros(4)).unwrap();
        let d0 = s.comet_direction(0.0);
        assert_relative_eq!(d0, Vector3::new(7000.0, -1000.0, 0.0).normalize(), epsilon = 1e-12);

        let mid = s.comet_direction(100.0);
        assert_relative_eq!(mid, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(s.ephemeris.range_km(100.0), 1000.0, epsilon = 1e-9);

        let end = s.comet_direction(200.0);
        assert_relative_eq!(end, Vector3::new(-7000.0, -1000.0, 0.0).normalize(), epsilon = 1e-12);
        // Unit at all times.
        for k in 0..=100 {
            let t = k as f64 * 2.0;
            assert_relative_eq!(s.comet_direction(t).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn benchmark_initial_attitude_points_at_comet() {
        let s = build_benchmark(None, &DVector::zeros(4)).unwrap();
        let angle = pointing_angle(&s.x_init.q, &s.comet_direction(0.0), &s.v_body);
        assert!(angle.to_degrees() < 0.5, "initial pointing angle {} deg", angle.to_degrees());
    }

    #[test]
    fn benchmark_nominal_geometry() {
        let s = build_benchmark(None, &DVector::zeros(4)).unwrap();
        assert_eq!(s.n_wheels(), 4);
        for j in 0..4 {
            assert_relative_eq!(s.plant.torque_distribution.column(j).norm(), 1.0, epsilon = 1e-12);
        }
        assert_eq!(s.n_nodes, 40);
        assert_relative_eq!(s.node_spacing(), 200.0 / 39.0, epsilon = 1e-12);
        s.validate().unwrap();
    }

    #[test]
    fn fault_removes_fourth_column() {
        let s = build_benchmark(Some(4), &DVector::zeros(3)).unwrap();
        assert_eq!(s.n_wheels(), 3);
        let nominal = build_benchmark(None, &DVector::zeros(4)).unwrap();
        for j in 0..3 {
            assert_relative_eq!(
                s.plant.torque_distribution.column(j),
                nominal.plant.torque_distribution.column(j),
                epsilon = 1e-15
            );
        }
        assert!(build_benchmark(Some(5), &DVector::zeros(3)).is_err());
        assert!(build_benchmark(Some(0), &DVector::zeros(3)).is_err());
    }

    #[test]
    fn momentum_bounds_are_enforced() {
        let ok = DVector::from_vec(alloc::vec![2.8, -2.8, 0.0, 1.0]);
        assert!(build_benchmark(None, &ok).is_ok());
        let bad = DVector::from_vec(alloc::vec![3.0, 0.0, 0.0, 0.0]);
        assert!(build_benchmark(None, &bad).is_err());
    }

    #[test]
    fn faulty_envelope_is_contained_in_nominal() {
        let nominal = build_benchmark(None, &DVector::zeros(4)).unwrap();
        let faulty = build_benchmark(Some(4), &DVector::zeros(3)).unwrap();
        let nom_v = momentum_envelope_vertices(&nominal.plant, &nominal.scaling.h_max);
        let fau_v = momentum_envelope_vertices(&faulty.plant, &faulty.scaling.h_max);
        // Compare axis-aligned extents: the faulty set must not exceed the
        // nominal set anywhere, and must be strictly smaller somewhere.
        let extent =
            |vs: &Vec<Vector3<f64>>, axis: usize| vs.iter().map(|v| libm::fabs(v[axis])).fold(0.0f64, libm::fmax);
        let mut strictly_smaller = false;
        for axis in 0..3 {
            let n = extent(&nom_v, axis);
            let f = extent(&fau_v, axis);
            assert!(f <= n + 1e-12);
            if f < n - 1e-9 {
                strictly_smaller = true;
            }
        }
        assert!(strictly_smaller);
    }

    #[test]
    fn sampler_is_reproducible_and_within_bounds() {
        let h_max = DVector::from_element(4, 3.2);
        let sampler = MomentumSampler::new(&h_max, 42);
        let a = sampler.sample(7);
        let b = sampler.sample(7);
        assert_eq!(a, b);
        let c = sampler.sample(8);
        assert_ne!(a, c);
        for i in 0..200u64 {
            let s = sampler.sample(i);
            for j in 0..4 {
                assert!(libm::fabs(s[j]) <= 0.9 * 3.2);
            }
        }
    }

    #[test]
    fn outage_counting_matches_definition() {
        let s = build_benchmark(None, &DVector::zeros(4)).unwrap();
        // Hold the initial attitude: the angle grows as the comet sweeps by.
        let times = s.times();
        let states: Vec<SpacecraftState> = times.iter().map(|_| s.x_init.clone()).collect();
        let controls: Vec<crate::attitude::ControlInput> =
            times.iter().map(|_| crate::attitude::ControlInput::zeros(4)).collect();
        let traj = Trajectory::new(times.clone(), states, controls).unwrap();
        let metrics = evaluate_outages(&traj, &s);

        let mut expected_ir = 0;
        for &t in &times {
            let angle = pointing_angle(&s.x_init.q, &s.comet_direction(t), &s.v_body);
            if angle > s.theta_imax {
                expected_ir += 1;
            }
        }
        assert_eq!(metrics.infrared_violation_nodes, expected_ir);
        assert_relative_eq!(metrics.infrared_outage_s, expected_ir as f64 * s.node_spacing(), epsilon = 1e-12);
        assert!(metrics.visual_outage_s >= metrics.infrared_outage_s);
        assert!(!metrics.zero_outage());

        // A trajectory that tracks the comet perfectly has zero outage. With
        // the passive convention `r_B = q* ⊗ r ⊗ q`, the quaternion that
        // points the boresight at `d` is the active rotation taking x̂ to d.
        let tracking: Vec<SpacecraftState> = times
            .iter()
            .map(|&t| {
                let d = s.comet_direction(t);
                let axis = Vector3::x().cross(&d);
                let angle = libm::acos(Vector3::x().dot(&d));
                let q = if axis.norm() < 1e-12 {
                    Quat::identity()
                } else {
                    Quat::from_axis_angle(&axis.normalize(), angle)
                };
                SpacecraftState { q, omega: Vector3::zeros(), h_wheels: DVector::zeros(4) }
            })
            .collect();
        let controls: Vec<crate::attitude::ControlInput> =
            times.iter().map(|_| crate::attitude::ControlInput::zeros(4)).collect();
        let traj = Trajectory::new(times, tracking, controls).unwrap();
        let metrics = evaluate_outages(&traj, &s);
        assert!(metrics.zero_outage(), "max err {}", metrics.max_pointing_error_rad);
    }

    #[test]
    fn initial_sun_angle_clears_the_exclusion_cone() {
        let s = build_benchmark(None, &DVector::zeros(4)).unwrap();
        let sun_angle = pointing_angle(&s.x_init.q, &s.r_sun, &s.v_body);
        assert!(sun_angle > s.theta_sun, "sun angle {} deg", sun_angle.to_degrees());
    }
}
