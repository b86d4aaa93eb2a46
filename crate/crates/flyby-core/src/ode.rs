//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! One controller-stepped explicit method serves both tolerance profiles used
//! by the guidance pipeline: loose for linearization references, tight for
//! truth propagation. Dense output uses the classic fifth-order interpolant
//! so supersampled diagnostics do not need extra right-hand-side evaluations.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerances and step limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size, seconds. Infinite by default.
    pub max_step: f64,
    /// Hard cap on accepted+rejected steps before giving up.
    pub max_steps: usize,
}

impl IntegratorSettings {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorSettings { rel_tol, abs_tol, max_step: f64::INFINITY, max_steps: 10_000_000 }
    }

    /// Profile used when generating linearization trajectories.
    pub fn loose() -> Self {
        IntegratorSettings::new(1e-5, 1e-5)
    }

    /// Profile used when computing the true state trajectory.
    pub fn tight() -> Self {
        IntegratorSettings::new(1e-10, 1e-10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return Err(Error::invalid("integration tolerances must be strictly positive"));
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const FAC1: f64 = 0.2;
const FAC2: f64 = 10.0;
const BETA: f64 = 0.04;
const UROUND: f64 = 2.3e-16;

/// Integrate `ẏ = f(t, y)` from `t0` to `t_end` (forward only) and return
/// `y(t_end)`.
pub fn integrate<F>(rhs: F, t0: f64, t_end: f64, y0: &DVector<f64>, settings: &IntegratorSettings) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>, &mut DVector<f64>),
{
    let mut sink = |_t0: f64, _t1: f64, _dense: &DenseSegment| {};
    integrate_impl(rhs, t0, t_end, y0, settings, &mut sink)
}

/// Integrate and evaluate the dense interpolant at `sample_times`, which must
/// be ascending and contained in `[t0, t_end]`. Returns one state per sample.
pub fn integrate_dense<F>(
    rhs: F,
    t0: f64,
    t_end: f64,
    y0: &DVector<f64>,
    settings: &IntegratorSettings,
    sample_times: &[f64],
) -> Result<Vec<DVector<f64>>>
where
    F: FnMut(f64, &DVector<f64>, &mut DVector<f64>),
{
    if !sample_times.windows(2).all(|w| w[1] >= w[0]) {
        return Err(Error::invalid("sample times must be ascending"));
    }
    if let (Some(first), Some(last)) = (sample_times.first(), sample_times.last()) {
        if *first < t0 - 1e-12 || *last > t_end + 1e-12 {
            return Err(Error::invalid("sample times must lie inside the integration span"));
        }
    }
    let mut samples: Vec<DVector<f64>> = Vec::with_capacity(sample_times.len());
    let mut cursor = 0usize;
    // Exact hit on t0 before any step is taken.
    while cursor < sample_times.len() && sample_times[cursor] <= t0 {
        samples.push(y0.clone());
        cursor += 1;
    }
    {
        let sink = &mut |t_lo: f64, t_hi: f64, dense: &DenseSegment| {
            while cursor < sample_times.len() && sample_times[cursor] <= t_hi + 1e-15 {
                let t = sample_times[cursor].min(t_hi);
                samples.push(dense.eval(t_lo, t_hi, t));
                cursor += 1;
            }
        };
        integrate_impl(rhs, t0, t_end, y0, settings, sink)?;
    }
    if cursor < sample_times.len() {
        return Err(Error::invalid("sample times extend past the integration span"));
    }
    Ok(samples)
}

/// Interpolation data for one accepted step.
pub struct DenseSegment {
    cont: [DVector<f64>; 5],
}

impl DenseSegment {
    fn eval(&self, t_lo: f64, t_hi: f64, t: f64) -> DVector<f64> {
        let h = t_hi - t_lo;
        let theta = if h == 0.0 { 0.0 } else { (t - t_lo) / h };
        let theta1 = 1.0 - theta;
        let inner = &self.cont[3] + &self.cont[4] * theta1;
        let mid = &self.cont[2] + inner * theta;
        &self.cont[0] + (&self.cont[1] + mid * theta1) * theta
    }
}

fn error_norm(err: &DVector<f64>, y0: &DVector<f64>, y1: &DVector<f64>, s: &IntegratorSettings) -> f64 {
    let n = err.len() as f64;
    let mut acc = 0.0;
    for i in 0..err.len() {
        let sk = s.abs_tol + s.rel_tol * libm::fmax(libm::fabs(y0[i]), libm::fabs(y1[i]));
        let r = err[i] / sk;
        acc += r * r;
    }
    libm::sqrt(acc / n)
}

fn initial_step<F>(rhs: &mut F, t0: f64, t_end: f64, y0: &DVector<f64>, f0: &DVector<f64>, s: &IntegratorSettings) -> f64
where
    F: FnMut(f64, &DVector<f64>, &mut DVector<f64>),
{
    let n = y0.len();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..n {
        let sk = s.abs_tol + s.rel_tol * libm::fabs(y0[i]);
        d0 += (y0[i] / sk) * (y0[i] / sk);
        d1 += (f0[i] / sk) * (f0[i] / sk);
    }
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * libm::sqrt(d0 / d1) };
    h0 = libm::fmin(h0, t_end - t0);
    // One explicit Euler probe to estimate the second derivative scale.
    let y1 = y0 + f0 * h0;
    let mut f1 = DVector::zeros(n);
    rhs(t0 + h0, &y1, &mut f1);
    let mut d2 = 0.0;
    for i in 0..n {
        let sk = s.abs_tol + s.rel_tol * libm::fabs(y0[i]);
        let df = (f1[i] - f0[i]) / sk;
        d2 += df * df;
    }
    let d2 = libm::sqrt(d2) / h0;
    let d1 = libm::sqrt(d1);
    let h1 = if libm::fmax(d1, d2) <= 1e-15 {
        libm::fmax(1e-6, h0 * 1e-3)
    } else {
        libm::pow(0.01 / libm::fmax(d1, d2), 0.2)
    };
    libm::fmin(libm::fmin(100.0 * h0, h1), libm::fmin(s.max_step, t_end - t0))
}

fn integrate_impl<F, S>(
    mut rhs: F,
    t0: f64,
    t_end: f64,
    y0: &DVector<f64>,
    settings: &IntegratorSettings,
    sink: &mut S,
) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>, &mut DVector<f64>),
    S: FnMut(f64, f64, &DenseSegment),
{
    settings.validate()?;
    if !(t_end > t0) {
        if t_end == t0 {
            return Ok(y0.clone());
        }
        return Err(Error::invalid("integration span must run forward"));
    }

    let n = y0.len();
    let mut y = y0.clone();
    let mut t = t0;
    let mut k1 = DVector::zeros(n);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    let mut k5 = DVector::zeros(n);
    let mut k6 = DVector::zeros(n);
    let mut k7 = DVector::zeros(n);
    let mut y_stage = DVector::zeros(n);

    rhs(t, &y, &mut k1);
    let mut h = initial_step(&mut rhs, t0, t_end, &y, &k1, settings);
    let mut facold: f64 = 1e-4;
    let expo1 = 0.2 - BETA * 0.75;

    for _step in 0..settings.max_steps {
        if 0.1 * h <= libm::fabs(t) * UROUND {
            return Err(Error::IntegrationFailure { t });
        }
        let mut last = false;
        if t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }

        y_stage.copy_from(&y);
        y_stage.axpy(h * A21, &k1, 1.0);
        rhs(t + C2 * h, &y_stage, &mut k2);

        y_stage.copy_from(&y);
        y_stage.axpy(h * A31, &k1, 1.0);
        y_stage.axpy(h * A32, &k2, 1.0);
        rhs(t + C3 * h, &y_stage, &mut k3);

        y_stage.copy_from(&y);
        y_stage.axpy(h * A41, &k1, 1.0);
        y_stage.axpy(h * A42, &k2, 1.0);
        y_stage.axpy(h * A43, &k3, 1.0);
        rhs(t + C4 * h, &y_stage, &mut k4);

        y_stage.copy_from(&y);
        y_stage.axpy(h * A51, &k1, 1.0);
        y_stage.axpy(h * A52, &k2, 1.0);
        y_stage.axpy(h * A53, &k3, 1.0);
        y_stage.axpy(h * A54, &k4, 1.0);
        rhs(t + C5 * h, &y_stage, &mut k5);

        y_stage.copy_from(&y);
        y_stage.axpy(h * A61, &k1, 1.0);
        y_stage.axpy(h * A62, &k2, 1.0);
        y_stage.axpy(h * A63, &k3, 1.0);
        y_stage.axpy(h * A64, &k4, 1.0);
        y_stage.axpy(h * A65, &k5, 1.0);
        rhs(t + h, &y_stage, &mut k6);

        // Fifth-order solution (also stage 7 location, FSAL).
        let mut y_new = y.clone();
        y_new.axpy(h * A71, &k1, 1.0);
        y_new.axpy(h * A73, &k3, 1.0);
        y_new.axpy(h * A74, &k4, 1.0);
        y_new.axpy(h * A75, &k5, 1.0);
        y_new.axpy(h * A76, &k6, 1.0);
        rhs(t + h, &y_new, &mut k7);

        let mut err_vec = DVector::zeros(n);
        err_vec.axpy(h * E1, &k1, 1.0);
        err_vec.axpy(h * E3, &k3, 1.0);
        err_vec.axpy(h * E4, &k4, 1.0);
        err_vec.axpy(h * E5, &k5, 1.0);
        err_vec.axpy(h * E6, &k6, 1.0);
        err_vec.axpy(h * E7, &k7, 1.0);
        let err = error_norm(&err_vec, &y, &y_new, settings);

        let fac11 = libm::pow(err, expo1);
        if err <= 1.0 {
            // Accepted: build the dense interpolant for this span.
            let ydiff = &y_new - &y;
            let bspl = &k1 * h - &ydiff;
            let mut cont5 = DVector::zeros(n);
            cont5.axpy(h * D1, &k1, 1.0);
            cont5.axpy(h * D3, &k3, 1.0);
            cont5.axpy(h * D4, &k4, 1.0);
            cont5.axpy(h * D5, &k5, 1.0);
            cont5.axpy(h * D6, &k6, 1.0);
            cont5.axpy(h * D7, &k7, 1.0);
            let cont4 = &ydiff - &k7 * h - &bspl;
            let dense = DenseSegment { cont: [y.clone(), ydiff, bspl, cont4, cont5] };
            sink(t, t + h, &dense);

            core::mem::swap(&mut k1, &mut k7);
            y.copy_from(&y_new);
            t += h;
            if last {
                return Ok(y);
            }
            let fac = libm::fmax(1.0 / FAC2, libm::fmin(1.0 / FAC1, fac11 / libm::pow(facold, BETA) / SAFE));
            facold = libm::fmax(err, 1e-4);
            h = libm::fmin(h / fac, settings.max_step);
        } else {
            // Rejected: shrink and retry.
            h /= libm::fmin(1.0 / FAC1, fac11 / SAFE);
        }
    }
    Err(Error::IntegrationFailure { t })
}
