//! File outputs: trajectory and iteration-trace CSVs for a single solve,
//! per-run and timing CSVs plus JSON summaries for campaigns, and the SVG
//! figures. The per-run results CSV is deterministic for a fixed seed;
//! wall-clock timings live in their own file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use flyby_core::error::{Error, Result};
use flyby_core::pointing::pointing_angle;
use flyby_core::scenario::Scenario;
use flyby_core::scp::GuidanceSolution;

use crate::montecarlo::{
    aggregate, Aggregates, CampaignConfig, CampaignResult, RunRecord, RunTiming, TimingSummary,
};
use crate::svg::Figure;

/// Build stamp embedded in campaign summaries.
pub const BUILD_STAMP: &str = concat!("flyby ", env!("CARGO_PKG_VERSION"));

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

// ---------------------------------------------------------------------------
// Single-solve outputs

/// Write trajectory CSV, iteration trace CSV and the four figures for one
/// guidance solution. Returns the list of files written.
pub fn write_solve_outputs(dir: &Path, solution: &GuidanceSolution, scenario: &Scenario) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    written.push(write_trajectory_csv(dir, solution, scenario)?);
    written.push(write_iteration_csv(dir, solution)?);
    written.extend(write_solve_figures(dir, solution, scenario)?);
    Ok(written)
}

fn write_trajectory_csv(dir: &Path, solution: &GuidanceSolution, scenario: &Scenario) -> Result<PathBuf> {
    let path = dir.join("trajectory.csv");
    let n_w = scenario.n_wheels();
    let mut header: Vec<String> = vec!["t".into(), "q1".into(), "q2".into(), "q3".into(), "q4".into()];
    header.extend(["wx", "wy", "wz"].map(String::from));
    header.extend((1..=n_w).map(|i| format!("h{i}")));
    header.extend((1..=n_w).map(|i| format!("tau{i}")));
    header.extend(["tau_bx", "tau_by", "tau_bz", "h_bx", "h_by", "h_bz"].map(String::from));
    header.extend(["comet_angle_deg", "gamma", "zeta"].map(String::from));

    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    w.write_record(&header).map_err(|e| Error::invalid(e.to_string()))?;
    let traj = &solution.trajectory;
    for (k, &t) in traj.times.iter().enumerate() {
        let state = &traj.states[k];
        let control = &traj.controls[k];
        let tau_body = &scenario.plant.torque_distribution * &control.tau;
        let h_body = &scenario.plant.torque_distribution * &state.h_wheels;
        let angle = pointing_angle(&state.q, &scenario.comet_direction(t), &scenario.v_body);
        let mut row: Vec<String> = vec![fmt(t), fmt(state.q.v[0]), fmt(state.q.v[1]), fmt(state.q.v[2]), fmt(state.q.s)];
        row.extend((0..3).map(|i| fmt(state.omega[i])));
        row.extend((0..n_w).map(|i| fmt(state.h_wheels[i])));
        row.extend((0..n_w).map(|i| fmt(control.tau[i])));
        row.extend((0..3).map(|i| fmt(tau_body[i])));
        row.extend((0..3).map(|i| fmt(h_body[i])));
        row.push(fmt(angle.to_degrees()));
        row.push(fmt(solution.scalars.gamma[k]));
        row.push(fmt(solution.scalars.zeta[k]));
        w.write_record(&row).map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn write_iteration_csv(dir: &Path, solution: &GuidanceSolution) -> Result<PathBuf> {
    let path = dir.join("iterations.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    w.write_record([
        "iteration",
        "attempt",
        "status",
        "accepted",
        "eps_x",
        "objective",
        "delta_xmax",
        "delta_umax",
        "solve_ms",
        "lin_ms",
        "int_ms",
    ])
    .map_err(|e| Error::invalid(e.to_string()))?;
    for r in &solution.iterations {
        w.write_record([
            r.iteration.to_string(),
            r.attempt.to_string(),
            format!("{:?}", r.status),
            r.accepted.to_string(),
            fmt(r.eps_x),
            fmt(r.objective),
            fmt(r.delta_xmax),
            fmt(r.delta_umax),
            fmt(r.solve_time_s * 1e3),
            fmt(r.lin_time_s * 1e3),
            fmt(r.int_time_s * 1e3),
        ])
        .map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn write_solve_figures(dir: &Path, solution: &GuidanceSolution, scenario: &Scenario) -> Result<Vec<PathBuf>> {
    let traj = &solution.trajectory;
    let times = &traj.times;
    let mut written = Vec::new();

    let mut angle_fig = Figure::new("Comet pointing angle", "time (s)", "angle (deg)");
    let angle_pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| (t, pointing_angle(&s.q, &scenario.comet_direction(t), &scenario.v_body).to_degrees()))
        .collect();
    angle_fig.line("pointing angle", angle_pts);
    angle_fig.hline(scenario.theta_vmax.to_degrees(), "visual limit");
    angle_fig.hline(scenario.theta_imax.to_degrees(), "infrared limit");
    let path = dir.join("fig_pointing_angle.svg");
    angle_fig.save(&path).map_err(|e| io_err(&path, e))?;
    written.push(path);

    let mut torque_fig = Figure::new("Body-frame wheel torque", "time (s)", "torque (N·m)");
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        let pts = times
            .iter()
            .zip(&traj.controls)
            .map(|(&t, c)| (t, (&scenario.plant.torque_distribution * &c.tau)[axis]))
            .collect();
        torque_fig.line(&format!("tau_{name}"), pts);
    }
    let path = dir.join("fig_torque_body.svg");
    torque_fig.save(&path).map_err(|e| io_err(&path, e))?;
    written.push(path);

    let mut momentum_fig = Figure::new("Body-frame wheel momentum", "time (s)", "momentum (N·m·s)");
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        let pts = times
            .iter()
            .zip(&traj.states)
            .map(|(&t, s)| (t, (&scenario.plant.torque_distribution * &s.h_wheels)[axis]))
            .collect();
        momentum_fig.line(&format!("h_{name}"), pts);
    }
    let path = dir.join("fig_momentum_body.svg");
    momentum_fig.save(&path).map_err(|e| io_err(&path, e))?;
    written.push(path);

    let mut envelope_fig = Figure::new("Pointing angle per accepted iteration", "time (s)", "angle (deg)");
    for (i, trace) in solution.angle_history.iter().enumerate() {
        let label = if i == 0 { "initial".to_string() } else { format!("iteration {i}") };
        let pts = times.iter().zip(trace).map(|(&t, &a)| (t, a.to_degrees())).collect();
        envelope_fig.line(&label, pts);
    }
    envelope_fig.hline(scenario.theta_vmax.to_degrees(), "visual limit");
    let path = dir.join("fig_iteration_angles.svg");
    envelope_fig.save(&path).map_err(|e| io_err(&path, e))?;
    written.push(path);

    Ok(written)
}

// ---------------------------------------------------------------------------
// Campaign outputs

const RUNS_HEADER: [&str; 12] = [
    "run_id",
    "h0_1",
    "h0_2",
    "h0_3",
    "h0_4",
    "h0_norm",
    "hbody_x",
    "hbody_y",
    "hbody_z",
    "visual_outage_s",
    "infrared_outage_s",
    "iterations",
];
// The termination label completes the record.
const RUNS_HEADER_FULL: usize = 13;

/// The deterministic per-run results file.
pub fn write_runs_csv(dir: &Path, records: &[RunRecord]) -> Result<PathBuf> {
    let path = dir.join("runs.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let mut header: Vec<String> = RUNS_HEADER.iter().map(|s| s.to_string()).collect();
    header.push("termination".into());
    w.write_record(&header).map_err(|e| Error::invalid(e.to_string()))?;
    for r in records {
        let row = vec![
            r.run_id.to_string(),
            fmt(r.h0_full[0]),
            fmt(r.h0_full[1]),
            fmt(r.h0_full[2]),
            fmt(r.h0_full[3]),
            fmt(r.h0_norm),
            fmt(r.h_body[0]),
            fmt(r.h_body[1]),
            fmt(r.h_body[2]),
            fmt(r.visual_outage_s),
            fmt(r.infrared_outage_s),
            r.iterations.to_string(),
            r.termination.clone(),
        ];
        w.write_record(&row).map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Wall-clock per-run step timings (volatile; excluded from determinism
/// guarantees).
pub fn write_timings_csv(dir: &Path, timings: &[RunTiming]) -> Result<PathBuf> {
    let path = dir.join("timings.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    w.write_record(["run_id", "lin_ms", "opt_ms", "int_ms"]).map_err(|e| Error::invalid(e.to_string()))?;
    for t in timings {
        w.write_record([t.run_id.to_string(), fmt(t.lin_ms), fmt(t.opt_ms), fmt(t.int_ms)])
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Strict reader for `runs.csv`: the header must match exactly.
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    {
        let header = r.headers().map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        if header.len() != RUNS_HEADER_FULL
            || header.iter().take(RUNS_HEADER.len()).zip(RUNS_HEADER.iter()).any(|(a, b)| a != *b)
            || header.get(12) != Some("termination")
        {
            return Err(Error::invalid(format!("{}: unexpected header", path.display())));
        }
    }
    let mut records = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        if row.len() != RUNS_HEADER_FULL {
            return Err(Error::invalid(format!("{}: malformed record on line {}", path.display(), line + 2)));
        }
        let f = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|e| Error::invalid(format!("{}: line {}: {e}", path.display(), line + 2)))
        };
        records.push(RunRecord {
            run_id: row[0]
                .parse()
                .map_err(|e| Error::invalid(format!("{}: line {}: {e}", path.display(), line + 2)))?,
            h0_full: [f(1)?, f(2)?, f(3)?, f(4)?],
            h0_norm: f(5)?,
            h_body: [f(6)?, f(7)?, f(8)?],
            visual_outage_s: f(9)?,
            infrared_outage_s: f(10)?,
            iterations: row[11]
                .parse()
                .map_err(|e| Error::invalid(format!("{}: line {}: {e}", path.display(), line + 2)))?,
            termination: row[12].to_string(),
        });
    }
    Ok(records)
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a CampaignConfig,
    scenario: &'a str,
    backend: &'a str,
    build: &'a str,
    aggregates: &'a Aggregates,
    timing: &'a TimingSummary,
}

/// Write every campaign artifact into `dir`; returns the files written.
pub fn write_campaign_outputs(
    dir: &Path,
    result: &CampaignResult,
    config: &CampaignConfig,
    scenario_spec: &str,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    written.push(write_runs_csv(dir, &result.records)?);
    written.push(write_timings_csv(dir, &result.timings)?);

    // Deterministic aggregates in their own file so regeneration can be
    // compared byte for byte.
    let agg_path = dir.join("aggregates.json");
    let agg_text = serde_json::to_string_pretty(&result.aggregates).expect("aggregates serialize");
    fs::write(&agg_path, agg_text).map_err(|e| io_err(&agg_path, e))?;
    written.push(agg_path);

    let summary = Summary {
        config,
        scenario: scenario_spec,
        backend: &result.backend,
        build: BUILD_STAMP,
        aggregates: &result.aggregates,
        timing: &result.timing_summary,
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    written.push(path);

    written.extend(write_campaign_figures(dir, &result.records, &result.aggregates)?);
    Ok(written)
}

pub fn write_campaign_figures(dir: &Path, records: &[RunRecord], aggregates: &Aggregates) -> Result<Vec<PathBuf>> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.termination.starts_with("error")).collect();
    let mut written = Vec::new();

    let mut fig = Figure::new("Science outage vs initial momentum", "|h(0)| (N·m·s)", "outage (s)");
    fig.scatter("visual", ok.iter().map(|r| (r.h0_norm, r.visual_outage_s)).collect());
    fig.scatter("infrared", ok.iter().map(|r| (r.h0_norm, r.infrared_outage_s)).collect());
    let path = dir.join("fig_outage_vs_momentum.svg");
    fig.save(&path).map_err(|e| io_err(&path, e))?;
    written.push(path);

    let mut fig = Figure::new("Cumulative visual outage", "outage threshold (s)", "fraction of runs");
    fig.line(
        "fraction below threshold",
        aggregates.cumulative_visual_outage.iter().map(|p| (p.threshold_s, p.fraction)).collect(),
    );
    fig.with_y_range(0.0, 1.05);
    let path = dir.join("fig_outage_cumulative.svg");
    fig.save(&path).map_err(|e| io_err(&path, e))?;
    written.push(path);

    let mut fig = Figure::new("Iterations to termination", "iterations", "runs");
    fig.bars(
        "count",
        aggregates.iteration_histogram.iter().map(|b| (b.iterations as f64, b.count as f64)).collect(),
    );
    let n_ok = ok.len() as f64;
    fig.line(
        "cumulative count",
        aggregates
            .iteration_histogram
            .iter()
            .map(|b| (b.iterations as f64, b.cumulative_fraction * n_ok))
            .collect(),
    );
    let path = dir.join("fig_iterations.svg");
    fig.save(&path).map_err(|e| io_err(&path, e))?;
    written.push(path);

    let mut fig = Figure::new("Visual outage over body momentum", "h_body_x (N·m·s)", "h_body_y (N·m·s)");
    let zero: Vec<(f64, f64)> =
        ok.iter().filter(|r| r.visual_outage_s == 0.0).map(|r| (r.h_body[0], r.h_body[1])).collect();
    let low: Vec<(f64, f64)> = ok
        .iter()
        .filter(|r| r.visual_outage_s > 0.0 && r.visual_outage_s <= 30.0)
        .map(|r| (r.h_body[0], r.h_body[1]))
        .collect();
    let high: Vec<(f64, f64)> =
        ok.iter().filter(|r| r.visual_outage_s > 30.0).map(|r| (r.h_body[0], r.h_body[1])).collect();
    fig.scatter("no outage", zero);
    fig.scatter("outage ≤ 30 s", low);
    fig.scatter("outage > 30 s", high);
    let path = dir.join("fig_body_momentum.svg");
    fig.save(&path).map_err(|e| io_err(&path, e))?;
    written.push(path);

    Ok(written)
}

/// Regenerate aggregates and figures from `runs.csv` alone (the persistence
/// round-trip behind the `report` subcommand).
pub fn regenerate_report(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let runs_path = in_dir.join("runs.csv");
    if !runs_path.exists() {
        return Err(Error::invalid(format!("{}: missing", runs_path.display())));
    }
    let records = read_runs_csv(&runs_path)?;
    if records.is_empty() {
        return Err(Error::invalid(format!("{}: no records", runs_path.display())));
    }
    ensure_dir(out_dir)?;
    let aggregates = aggregate(&records);
    let agg_path = out_dir.join("aggregates.json");
    let text = serde_json::to_string_pretty(&aggregates).expect("aggregates serialize");
    fs::write(&agg_path, &text).map_err(|e| io_err(&agg_path, e))?;
    let mut written = vec![agg_path];
    written.extend(write_campaign_figures(out_dir, &records, &aggregates)?);
    Ok(written)
}

/// Shortest-round-trip float formatting (matches the CSV writer's encoding
/// of floats elsewhere).
fn fmt(v: f64) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.serialize(v).expect("float serializes");
        w.flush().expect("flush");
    }
    String::from_utf8(buf).expect("utf8").trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<RunRecord> {
        (0..12)
            .map(|i| RunRecord {
                run_id: i,
                h0_full: [0.1 * i as f64, -0.2, 0.3, 0.0],
                h0_norm: 0.37 * i as f64,
                h_body: [0.01, -0.02, 0.3],
                visual_outage_s: if i % 3 == 0 { 0.0 } else { i as f64 },
                infrared_outage_s: 0.0,
                iterations: 5 + (i as usize % 7),
                termination: "converged".to_string(),
            })
            .collect()
    }

    #[test]
    fn runs_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let records = sample_records();
        let path = write_runs_csv(dir.path(), &records).unwrap();
        let back = read_runs_csv(&path).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn strict_header_rejects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_runs_csv(dir.path(), &sample_records()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("h0_norm", "h0_mag", 1);
        fs::write(&path, tampered).unwrap();
        assert!(read_runs_csv(&path).is_err());
    }

    #[test]
    fn truncated_records_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_runs_csv(dir.path(), &sample_records()).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        // Chop the last record mid-field.
        text.truncate(text.len() - 20);
        fs::write(&path, text).unwrap();
        assert!(read_runs_csv(&path).is_err());
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let records = sample_records();
        write_runs_csv(dir.path(), &records).unwrap();
        let agg = aggregate(&records);
        let original = serde_json::to_string_pretty(&agg).unwrap();
        fs::write(dir.path().join("aggregates.json"), &original).unwrap();

        let out = tempfile::tempdir().unwrap();
        regenerate_report(dir.path(), out.path()).unwrap();
        let regenerated = fs::read_to_string(out.path().join("aggregates.json")).unwrap();
        assert_eq!(original, regenerated);
    }

    #[test]
    fn report_on_empty_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        assert!(regenerate_report(dir.path(), out.path()).is_err());
    }
}
