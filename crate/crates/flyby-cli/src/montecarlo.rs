//! Batched randomized campaigns: draw initial wheel momenta, run the
//! guidance loop, collect per-run records and aggregate statistics.
//!
//! Determinism contract: the records are a pure function of (scenario, seed,
//! sample count, fault); the worker count only changes scheduling. Run `i`
//! draws from substream `i` of the master seed, so results are independent
//! of execution order. Wall-clock timings are the one exception and are kept
//! out of the deterministic record set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use flyby_core::error::{Error, Result};
use flyby_core::scenario::{MomentumSampler, Scenario};
use flyby_core::scp::run_scp;

use crate::solver::ClarabelBackend;
use crate::WallClock;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub samples: usize,
    /// 1-based index of a failed wheel, if any (echoed into the summary).
    pub fault: Option<usize>,
    pub seed: u64,
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
}

/// Deterministic per-run results (everything the CSV carries except
/// timings).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: u64,
    /// Initial momenta placed at the physical wheel positions; failed wheels
    /// read zero.
    pub h0_full: [f64; 4],
    pub h0_norm: f64,
    pub h_body: [f64; 3],
    pub visual_outage_s: f64,
    pub infrared_outage_s: f64,
    pub iterations: usize,
    pub termination: String,
}

/// Volatile per-run timings, milliseconds (means over the run's calls).
#[derive(Debug, Clone, PartialEq)]
pub struct RunTiming {
    pub run_id: u64,
    pub lin_ms: f64,
    pub opt_ms: f64,
    pub int_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CumulativePoint {
    pub threshold_s: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterationBin {
    pub iterations: usize,
    pub count: usize,
    pub cumulative_fraction: f64,
}

/// Statistics recomputable from the per-run CSV alone.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Aggregates {
    pub sample_count: usize,
    pub failed_runs: usize,
    pub zero_visual_outage_fraction: f64,
    pub zero_infrared_outage_fraction: f64,
    pub visual_outage_percentiles: Percentiles,
    pub cumulative_visual_outage: Vec<CumulativePoint>,
    pub iteration_histogram: Vec<IterationBin>,
    pub median_iterations: f64,
    pub fraction_over_25_iterations: f64,
    /// Mean visual outage per ‖h(0)‖ decile, ascending momentum.
    pub mean_visual_outage_by_h0_decile: Vec<f64>,
}

/// Mean and range of one Algorithm step across runs, milliseconds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepTiming {
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TimingSummary {
    pub linearization: StepTiming,
    pub optimization: StepTiming,
    pub integration: StepTiming,
}

pub struct CampaignResult {
    pub records: Vec<RunRecord>,
    pub timings: Vec<RunTiming>,
    pub aggregates: Aggregates,
    pub timing_summary: TimingSummary,
    pub backend: String,
}

fn mean_ms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().sum::<f64>() / samples.len() as f64 * 1e3
}

/// Indices of the active wheels in the four-wheel assembly.
fn active_wheel_positions(fault: Option<usize>, n_w: usize) -> Vec<usize> {
    match fault {
        None => (0..n_w).collect(),
        Some(f) => (0..4).filter(|&i| i != f - 1).collect(),
    }
}

fn run_one(base: &Scenario, sampler: &MomentumSampler, fault: Option<usize>, run_id: u64) -> (RunRecord, RunTiming) {
    let h0 = sampler.sample(run_id);
    let positions = active_wheel_positions(fault, base.n_wheels());
    let mut h0_full = [0.0; 4];
    for (slot, &pos) in positions.iter().enumerate() {
        h0_full[pos] = h0[slot];
    }
    let lh = &base.plant.torque_distribution * &h0;
    let h_body = [lh[0], lh[1], lh[2]];

    let mut scenario = base.clone();
    scenario.x_init.h_wheels = h0.clone();

    // A panicking run is recorded like any other failure; it must never
    // take the campaign down with it.
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        let mut backend = ClarabelBackend::default();
        let clock = WallClock::new();
        run_scp(&scenario, &mut backend, &clock)
    }))
    .unwrap_or_else(|_| Err(flyby_core::Error::Solver("run panicked".to_string())));

    match outcome {
        Ok(solution) => (
            RunRecord {
                run_id,
                h0_full,
                h0_norm: h0.norm(),
                h_body,
                visual_outage_s: solution.outages.visual_outage_s,
                infrared_outage_s: solution.outages.infrared_outage_s,
                iterations: solution.outer_iterations,
                termination: solution.termination.as_str().to_string(),
            },
            RunTiming {
                run_id,
                lin_ms: mean_ms(&solution.lin_times),
                opt_ms: mean_ms(&solution.opt_times),
                int_ms: mean_ms(&solution.int_times),
            },
        ),
        Err(e) => (
            RunRecord {
                run_id,
                h0_full,
                h0_norm: h0.norm(),
                h_body,
                visual_outage_s: f64::NAN,
                infrared_outage_s: f64::NAN,
                iterations: 0,
                termination: format!("error: {e}"),
            },
            RunTiming { run_id, lin_ms: 0.0, opt_ms: 0.0, int_ms: 0.0 },
        ),
    }
}

/// Run a full campaign against a base scenario (whose initial momenta are
/// replaced by the per-run draw).
pub fn run_campaign(base: &Scenario, config: &CampaignConfig) -> Result<CampaignResult> {
    if config.samples == 0 {
        return Err(Error::invalid("sample count must be at least one"));
    }
    base.validate()?;
    let sampler = MomentumSampler::new(&base.scaling.h_max, config.seed);

    let runs: Vec<(RunRecord, RunTiming)> = if config.workers == 1 {
        (0..config.samples as u64).map(|i| run_one(base, &sampler, config.fault, i)).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if config.workers > 0 {
            builder = builder.num_threads(config.workers);
        }
        let pool = builder.build().map_err(|e| Error::Solver(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..config.samples as u64)
                .into_par_iter()
                .map(|i| run_one(base, &sampler, config.fault, i))
                .collect()
        })
    };

    let (records, timings): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let aggregates = aggregate(&records);
    let timing_summary = summarize_timings(&timings);
    Ok(CampaignResult {
        records,
        timings,
        aggregates,
        timing_summary,
        backend: "clarabel".to_string(),
    })
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)]
}

/// Aggregate statistics from per-run records; failed runs are counted and
/// excluded from the distributions.
pub fn aggregate(records: &[RunRecord]) -> Aggregates {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.termination.starts_with("error")).collect();
    let failed_runs = records.len() - ok.len();
    let n = ok.len().max(1) as f64;

    let zero_vis = ok.iter().filter(|r| r.visual_outage_s == 0.0).count() as f64 / n;
    let zero_ir = ok.iter().filter(|r| r.infrared_outage_s == 0.0).count() as f64 / n;

    let mut vis_sorted: Vec<f64> = ok.iter().map(|r| r.visual_outage_s).collect();
    vis_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite outages"));
    let percentiles = Percentiles {
        p50: percentile(&vis_sorted, 0.50),
        p90: percentile(&vis_sorted, 0.90),
        p99: percentile(&vis_sorted, 0.99),
        max: vis_sorted.last().copied().unwrap_or(f64::NAN),
    };

    let cumulative_visual_outage = (0..=40)
        .map(|i| {
            let threshold_s = i as f64 * 5.0;
            let fraction = ok.iter().filter(|r| r.visual_outage_s <= threshold_s).count() as f64 / n;
            CumulativePoint { threshold_s, fraction }
        })
        .collect();

    let max_iter = ok.iter().map(|r| r.iterations).max().unwrap_or(0);
    let mut iteration_histogram = Vec::with_capacity(max_iter);
    let mut cumulative = 0usize;
    for it in 1..=max_iter {
        let count = ok.iter().filter(|r| r.iterations == it).count();
        cumulative += count;
        iteration_histogram.push(IterationBin {
            iterations: it,
            count,
            cumulative_fraction: cumulative as f64 / n,
        });
    }
    let mut iters_sorted: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
    iters_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median_iterations = percentile(&iters_sorted, 0.5);
    let fraction_over_25 = ok.iter().filter(|r| r.iterations > 25).count() as f64 / n;

    // Momentum deciles, ascending ‖h(0)‖, stable on ties via run id.
    let mut by_momentum: Vec<&RunRecord> = ok.clone();
    by_momentum.sort_by(|a, b| {
        a.h0_norm.partial_cmp(&b.h0_norm).expect("finite").then(a.run_id.cmp(&b.run_id))
    });
    let mut mean_by_decile = Vec::with_capacity(10);
    if !by_momentum.is_empty() {
        let len = by_momentum.len();
        for d in 0..10 {
            let lo = d * len / 10;
            let hi = ((d + 1) * len / 10).max(lo + 1).min(len);
            if lo >= len {
                break;
            }
            let slice = &by_momentum[lo..hi];
            mean_by_decile
                .push(slice.iter().map(|r| r.visual_outage_s).sum::<f64>() / slice.len() as f64);
        }
    }

    Aggregates {
        sample_count: records.len(),
        failed_runs,
        zero_visual_outage_fraction: zero_vis,
        zero_infrared_outage_fraction: zero_ir,
        visual_outage_percentiles: percentiles,
        cumulative_visual_outage,
        iteration_histogram,
        median_iterations,
        fraction_over_25_iterations: fraction_over_25,
        mean_visual_outage_by_h0_decile: mean_by_decile,
    }
}

pub fn summarize_timings(timings: &[RunTiming]) -> TimingSummary {
    let step = |f: fn(&RunTiming) -> f64| {
        let values: Vec<f64> = timings.iter().map(f).filter(|v| *v > 0.0).collect();
        if values.is_empty() {
            return StepTiming { mean_ms: 0.0, min_ms: 0.0, max_ms: 0.0 };
        }
        StepTiming {
            mean_ms: values.iter().sum::<f64>() / values.len() as f64,
            min_ms: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max_ms: values.iter().cloned().fold(0.0, f64::max),
        }
    };
    TimingSummary {
        linearization: step(|t| t.lin_ms),
        optimization: step(|t| t.opt_ms),
        integration: step(|t| t.int_ms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(run_id: u64, vis: f64, iters: usize) -> RunRecord {
        RunRecord {
            run_id,
            h0_full: [0.0; 4],
            h0_norm: run_id as f64,
            h_body: [0.0; 3],
            visual_outage_s: vis,
            infrared_outage_s: 0.0,
            iterations: iters,
            termination: "converged".to_string(),
        }
    }

    #[test]
    fn all_zero_records_aggregate_to_unit_fraction() {
        let records: Vec<RunRecord> = (0..10).map(|i| record(i, 0.0, 5)).collect();
        let agg = aggregate(&records);
        assert_eq!(agg.zero_visual_outage_fraction, 1.0);
        assert_eq!(agg.failed_runs, 0);
        assert_eq!(agg.median_iterations, 5.0);
        assert_eq!(agg.fraction_over_25_iterations, 0.0);
    }

    #[test]
    fn synthetic_quantiles_are_exact() {
        // Outages 0..9 seconds; half are ≤ 4.
        let records: Vec<RunRecord> = (0..10).map(|i| record(i, i as f64, (i + 1) as usize)).collect();
        let agg = aggregate(&records);
        assert_eq!(agg.zero_visual_outage_fraction, 0.1);
        assert_eq!(agg.visual_outage_percentiles.max, 9.0);
        let at_5s = agg.cumulative_visual_outage.iter().find(|p| p.threshold_s == 5.0).unwrap();
        assert_eq!(at_5s.fraction, 0.6);
        // Histogram counts: one run per iteration count 1..=10.
        assert_eq!(agg.iteration_histogram.len(), 10);
        assert!(agg.iteration_histogram.iter().all(|b| b.count == 1));
        assert_eq!(agg.iteration_histogram.last().unwrap().cumulative_fraction, 1.0);
        // Deciles: outage grows with ‖h0‖ by construction.
        let deciles = &agg.mean_visual_outage_by_h0_decile;
        assert_eq!(deciles.len(), 10);
        assert!(deciles.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn failed_runs_are_counted_but_not_aggregated() {
        let mut records: Vec<RunRecord> = (0..4).map(|i| record(i, 0.0, 3)).collect();
        records.push(RunRecord {
            termination: "error: solver backend: boom".to_string(),
            visual_outage_s: f64::NAN,
            ..record(4, 0.0, 0)
        });
        let agg = aggregate(&records);
        assert_eq!(agg.sample_count, 5);
        assert_eq!(agg.failed_runs, 1);
        assert_eq!(agg.zero_visual_outage_fraction, 1.0);
    }

    #[test]
    fn wheel_positions_respect_the_fault_index() {
        assert_eq!(active_wheel_positions(None, 4), vec![0, 1, 2, 3]);
        assert_eq!(active_wheel_positions(Some(4), 3), vec![0, 1, 2]);
        assert_eq!(active_wheel_positions(Some(1), 3), vec![1, 2, 3]);
    }
}
