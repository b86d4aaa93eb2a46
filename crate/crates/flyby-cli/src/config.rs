//! Scenario files: a JSON document mirroring the scenario in physical units.
//! Unknown keys are rejected. The name `comet-interceptor` resolves to the
//! built-in benchmark preset instead of a file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use flyby_core::attitude::{Quat, ScalingSet, SpacecraftState};
use flyby_core::dynamics::PlantModel;
use flyby_core::error::{Error, Result};
use flyby_core::nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use flyby_core::ode::IntegratorSettings;
use flyby_core::scenario::{build_benchmark, LinearEphemeris, Scenario, BENCHMARK_PRESET};
use flyby_core::scp::ScpConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EphemerisConfig {
    pub p0_km: [f64; 3],
    pub v_kmps: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    /// Quaternion `[v1 v2 v3 s]`; normalized on load.
    pub q: [f64; 4],
    pub omega_deg_s: [f64; 3],
    pub h_wheels_nms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub inertia_kgm2: [[f64; 3]; 3],
    /// Wheel spin axes as unit vectors, one per wheel.
    pub wheel_axes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub omega_max_deg_s: [f64; 3],
    pub h_max_nms: Vec<f64>,
    pub tau_max_nm: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScpSection {
    pub max_iterations: usize,
    pub max_rejections: usize,
    pub initial_trust_x: f64,
    pub initial_trust_u: f64,
    pub kappa_expand: f64,
    pub kappa_contract: f64,
    pub feasibility_threshold: f64,
    pub convergence_threshold: f64,
    /// `null` means no time limit.
    pub time_limit_s: Option<f64>,
    pub card_epsilon: f64,
    pub linearize_tol: f64,
    pub truth_tol: f64,
}

impl Default for ScpSection {
    fn default() -> Self {
        let c = ScpConfig::default();
        ScpSection {
            max_iterations: c.max_iterations,
            max_rejections: c.max_rejections,
            initial_trust_x: c.initial_trust_x,
            initial_trust_u: c.initial_trust_u,
            kappa_expand: c.kappa_expand,
            kappa_contract: c.kappa_contract,
            feasibility_threshold: c.feasibility_threshold,
            convergence_threshold: c.convergence_threshold,
            time_limit_s: None,
            card_epsilon: c.card_epsilon,
            linearize_tol: c.linearize_settings.rel_tol,
            truth_tol: c.truth_settings.rel_tol,
        }
    }
}

impl ScpSection {
    fn to_config(&self) -> ScpConfig {
        ScpConfig {
            max_iterations: self.max_iterations,
            max_rejections: self.max_rejections,
            initial_trust_x: self.initial_trust_x,
            initial_trust_u: self.initial_trust_u,
            kappa_expand: self.kappa_expand,
            kappa_contract: self.kappa_contract,
            feasibility_threshold: self.feasibility_threshold,
            convergence_threshold: self.convergence_threshold,
            time_limit: self.time_limit_s.unwrap_or(f64::INFINITY),
            card_epsilon: self.card_epsilon,
            linearize_settings: IntegratorSettings::new(self.linearize_tol, self.linearize_tol),
            truth_settings: IntegratorSettings::new(self.truth_tol, self.truth_tol),
            inaccurate_residual_tol: ScpConfig::default().inaccurate_residual_tol,
        }
    }

    fn from_config(c: &ScpConfig) -> Self {
        ScpSection {
            max_iterations: c.max_iterations,
            max_rejections: c.max_rejections,
            initial_trust_x: c.initial_trust_x,
            initial_trust_u: c.initial_trust_u,
            kappa_expand: c.kappa_expand,
            kappa_contract: c.kappa_contract,
            feasibility_threshold: c.feasibility_threshold,
            convergence_threshold: c.convergence_threshold,
            time_limit_s: if c.time_limit.is_finite() { Some(c.time_limit) } else { None },
            card_epsilon: c.card_epsilon,
            linearize_tol: c.linearize_settings.rel_tol,
            truth_tol: c.truth_settings.rel_tol,
        }
    }
}

fn default_tightening() -> f64 {
    0.03
}

fn default_beta() -> [f64; 6] {
    [1.0, 1.0, 0.1, 0.01, 0.1, 0.1]
}

fn default_r_sun() -> [f64; 3] {
    [0.0, 0.0, -1.0]
}

/// The on-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub t_f_s: f64,
    pub n_nodes: usize,
    pub ephemeris: EphemerisConfig,
    #[serde(default = "default_r_sun")]
    pub r_sun: [f64; 3],
    pub v_body: [f64; 3],
    pub theta_vmax_deg: f64,
    pub theta_imax_deg: f64,
    pub theta_sun_deg: f64,
    pub initial_state: InitialStateConfig,
    pub plant: PlantConfig,
    pub limits: LimitsConfig,
    #[serde(default = "default_beta")]
    pub beta: [f64; 6],
    #[serde(default = "default_tightening")]
    pub tightening: f64,
    #[serde(default)]
    pub scp: ScpSection,
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let n_w = self.plant.wheel_axes.len();
        if self.limits.h_max_nms.len() != n_w
            || self.limits.tau_max_nm.len() != n_w
            || self.initial_state.h_wheels_nms.len() != n_w
        {
            return Err(Error::invalid("wheel-indexed arrays must all have one entry per wheel"));
        }
        let mut axes = DMatrix::zeros(3, n_w);
        for (j, axis) in self.plant.wheel_axes.iter().enumerate() {
            for i in 0..3 {
                axes[(i, j)] = axis[i];
            }
        }
        let j = self.plant.inertia_kgm2;
        let inertia = Matrix3::new(
            j[0][0], j[0][1], j[0][2], j[1][0], j[1][1], j[1][2], j[2][0], j[2][1], j[2][2],
        );
        let plant = PlantModel::new(inertia, axes)?;
        let scaling = ScalingSet::new(
            Vector3::new(
                self.limits.omega_max_deg_s[0].to_radians(),
                self.limits.omega_max_deg_s[1].to_radians(),
                self.limits.omega_max_deg_s[2].to_radians(),
            ),
            DVector::from_vec(self.limits.h_max_nms.clone()),
            DVector::from_vec(self.limits.tau_max_nm.clone()),
        )?;
        let q = self.initial_state.q;
        let scenario = Scenario {
            t_f: self.t_f_s,
            n_nodes: self.n_nodes,
            ephemeris: LinearEphemeris {
                p0_km: Vector3::from_column_slice(&self.ephemeris.p0_km),
                v_kmps: Vector3::from_column_slice(&self.ephemeris.v_kmps),
            },
            r_sun: Vector3::from_column_slice(&self.r_sun).normalize(),
            v_body: Vector3::from_column_slice(&self.v_body).normalize(),
            theta_vmax: self.theta_vmax_deg.to_radians(),
            theta_imax: self.theta_imax_deg.to_radians(),
            theta_sun: self.theta_sun_deg.to_radians(),
            x_init: SpacecraftState {
                q: Quat::new(q[0], q[1], q[2], q[3]).normalized(),
                omega: Vector3::new(
                    self.initial_state.omega_deg_s[0].to_radians(),
                    self.initial_state.omega_deg_s[1].to_radians(),
                    self.initial_state.omega_deg_s[2].to_radians(),
                ),
                h_wheels: DVector::from_vec(self.initial_state.h_wheels_nms.clone()),
            },
            plant,
            scaling,
            beta: self.beta,
            tightening: self.tightening,
            scp: self.scp.to_config(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let n_w = s.n_wheels();
        let mut wheel_axes = Vec::with_capacity(n_w);
        for jw in 0..n_w {
            let c = s.plant.torque_distribution.column(jw);
            wheel_axes.push([c[0], c[1], c[2]]);
        }
        let j = &s.plant.inertia;
        ScenarioConfig {
            t_f_s: s.t_f,
            n_nodes: s.n_nodes,
            ephemeris: EphemerisConfig {
                p0_km: [s.ephemeris.p0_km[0], s.ephemeris.p0_km[1], s.ephemeris.p0_km[2]],
                v_kmps: [s.ephemeris.v_kmps[0], s.ephemeris.v_kmps[1], s.ephemeris.v_kmps[2]],
            },
            r_sun: [s.r_sun[0], s.r_sun[1], s.r_sun[2]],
            v_body: [s.v_body[0], s.v_body[1], s.v_body[2]],
            theta_vmax_deg: s.theta_vmax.to_degrees(),
            theta_imax_deg: s.theta_imax.to_degrees(),
            theta_sun_deg: s.theta_sun.to_degrees(),
            initial_state: InitialStateConfig {
                q: [s.x_init.q.v[0], s.x_init.q.v[1], s.x_init.q.v[2], s.x_init.q.s],
                omega_deg_s: [
                    s.x_init.omega[0].to_degrees(),
                    s.x_init.omega[1].to_degrees(),
                    s.x_init.omega[2].to_degrees(),
                ],
                h_wheels_nms: s.x_init.h_wheels.iter().copied().collect(),
            },
            plant: PlantConfig {
                inertia_kgm2: [
                    [j[(0, 0)], j[(0, 1)], j[(0, 2)]],
                    [j[(1, 0)], j[(1, 1)], j[(1, 2)]],
                    [j[(2, 0)], j[(2, 1)], j[(2, 2)]],
                ],
                wheel_axes,
            },
            limits: LimitsConfig {
                omega_max_deg_s: [
                    s.scaling.omega_max[0].to_degrees(),
                    s.scaling.omega_max[1].to_degrees(),
                    s.scaling.omega_max[2].to_degrees(),
                ],
                h_max_nms: s.scaling.h_max.iter().copied().collect(),
                tau_max_nm: s.scaling.tau_max.iter().copied().collect(),
            },
            beta: s.beta,
            tightening: s.tightening,
            scp: ScpSection::from_config(&s.scp),
        }
    }
}

/// How the initial wheel momenta may be specified on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentumSpec {
    Zero,
    /// 90% of every wheel's momentum limit.
    NearSaturation,
    Values(Vec<f64>),
}

impl MomentumSpec {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "zero" => Ok(MomentumSpec::Zero),
            "near-saturation" => Ok(MomentumSpec::NearSaturation),
            _ => {
                let values = text
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| Error::invalid(format!("momentum value: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok(MomentumSpec::Values(values))
            }
        }
    }

    pub fn resolve(&self, h_max: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            MomentumSpec::Zero => Ok(DVector::zeros(h_max.len())),
            MomentumSpec::NearSaturation => Ok(h_max * 0.9),
            MomentumSpec::Values(v) => {
                if v.len() != h_max.len() {
                    return Err(Error::DimensionMismatch { expected: h_max.len(), actual: v.len() });
                }
                Ok(DVector::from_vec(v.clone()))
            }
        }
    }
}

/// Resolve `--scenario` (preset name or JSON path) together with the fault
/// and initial-momentum flags into a ready scenario.
pub fn resolve_scenario(spec: &str, fault: Option<usize>, h0: Option<&MomentumSpec>) -> Result<Scenario> {
    if spec == BENCHMARK_PRESET {
        let n_w = if fault.is_some() { 3 } else { 4 };
        let h_max = DVector::from_element(n_w, 3.2);
        let h0 = match h0 {
            Some(spec) => spec.resolve(&h_max)?,
            None => DVector::zeros(n_w),
        };
        return build_benchmark(fault, &h0);
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read scenario file {}: {e}", path.display())))?;
    let config: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("scenario file: {e}")))?;
    let mut scenario = config.to_scenario()?;
    if let Some(idx) = fault {
        scenario = apply_fault(&scenario, idx)?;
    }
    if let Some(spec) = h0 {
        let h0 = spec.resolve(&scenario.scaling.h_max)?;
        scenario.x_init.h_wheels = h0;
        scenario.validate()?;
    }
    Ok(scenario)
}

/// Remove wheel `index` (1-based) from a loaded scenario: the spin-axis
/// column and the wheel-indexed limit and state entries disappear.
pub fn apply_fault(scenario: &Scenario, index: usize) -> Result<Scenario> {
    let n_w = scenario.n_wheels();
    if !(1..=n_w).contains(&index) {
        return Err(Error::invalid(format!("fault index must name one of the {n_w} wheels")));
    }
    let j = index - 1;
    let drop = |v: &DVector<f64>| {
        DVector::from_iterator(n_w - 1, v.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, x)| *x))
    };
    let mut out = scenario.clone();
    out.plant = scenario.plant.with_wheel_removed(j)?;
    out.scaling = ScalingSet::new(scenario.scaling.omega_max, drop(&scenario.scaling.h_max), drop(&scenario.scaling.tau_max))?;
    out.x_init.h_wheels = drop(&scenario.x_init.h_wheels);
    out.validate()?;
    Ok(out)
}

/// Serialize a scenario to pretty JSON.
pub fn scenario_to_json(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioConfig::from_scenario(scenario)).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn preset_round_trips_through_json() {
        let s = build_benchmark(None, &DVector::zeros(4)).unwrap();
        let text = scenario_to_json(&s);
        let config: ScenarioConfig = serde_json::from_str(&text).unwrap();
        let back = config.to_scenario().unwrap();
        assert_relative_eq!(back.t_f, s.t_f);
        assert_relative_eq!(back.theta_vmax, s.theta_vmax, epsilon = 1e-15);
        assert_relative_eq!(
            (back.x_init.q.as_vector() - s.x_init.q.as_vector()).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(back.scp.convergence_threshold, s.scp.convergence_threshold);
        assert_eq!(back.n_wheels(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let s = build_benchmark(None, &DVector::zeros(4)).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&scenario_to_json(&s)).unwrap();
        value.as_object_mut().unwrap().insert("surprise".into(), serde_json::json!(1));
        let err = serde_json::from_value::<ScenarioConfig>(value);
        assert!(err.is_err());
    }

    #[test]
    fn fault_flag_applies_to_file_scenarios() {
        let s = build_benchmark(None, &DVector::zeros(4)).unwrap();
        let faulted = apply_fault(&s, 4).unwrap();
        assert_eq!(faulted.n_wheels(), 3);
        let reference = build_benchmark(Some(4), &DVector::zeros(3)).unwrap();
        assert_relative_eq!(
            (&faulted.plant.torque_distribution - &reference.plant.torque_distribution).norm(),
            0.0,
            epsilon = 1e-15
        );
        assert!(apply_fault(&s, 9).is_err());
    }

    #[test]
    fn momentum_spec_parsing() {
        assert_eq!(MomentumSpec::parse("zero").unwrap(), MomentumSpec::Zero);
        assert_eq!(MomentumSpec::parse("near-saturation").unwrap(), MomentumSpec::NearSaturation);
        assert_eq!(
            MomentumSpec::parse("1.0, -2.5,0.25,0").unwrap(),
            MomentumSpec::Values(vec![1.0, -2.5, 0.25, 0.0])
        );
        assert!(MomentumSpec::parse("1.0,abc").is_err());

        let h_max = DVector::from_element(3, 3.2);
        let near = MomentumSpec::NearSaturation.resolve(&h_max).unwrap();
        assert_relative_eq!(near[0], 2.88, epsilon = 1e-12);
        assert!(MomentumSpec::Values(vec![1.0]).resolve(&h_max).is_err());
    }

    #[test]
    fn preset_resolution_honours_fault_and_momentum() {
        let s = resolve_scenario(BENCHMARK_PRESET, Some(4), Some(&MomentumSpec::NearSaturation)).unwrap();
        assert_eq!(s.n_wheels(), 3);
        assert_relative_eq!(s.x_init.h_wheels[0], 2.88, epsilon = 1e-12);
        assert!(resolve_scenario("/nonexistent/path.json", None, None).is_err());
    }
}
