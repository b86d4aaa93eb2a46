//! `flyby`: compute reaction-wheel guidance trajectories for a comet flyby,
//! run randomized campaigns over dust-impact momenta, and rebuild campaign
//! reports from their persisted records.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use flyby_cli::config::{resolve_scenario, MomentumSpec};
use flyby_cli::montecarlo::{run_campaign, CampaignConfig};
use flyby_cli::parallel::par_discretize_nodes;
use flyby_cli::report::{regenerate_report, write_campaign_outputs, write_solve_outputs};
use flyby_cli::solver::ClarabelBackend;
use flyby_cli::WallClock;
use flyby_core::scp::{run_scp_with, Termination};

#[derive(Parser)]
#[command(
    name = "flyby",
    version,
    about = "Reaction-wheel attitude guidance for high-speed flyby imaging",
    propagate_version = true
)]
struct Cli {
    /// Scenario: a JSON file path or the built-in preset `comet-interceptor`.
    #[arg(long, global = true, default_value = "comet-interceptor")]
    scenario: String,

    /// Output directory for all generated files.
    #[arg(long, global = true, env = "FLYBY_OUT_DIR", default_value = "out")]
    out: PathBuf,

    /// Master seed for randomized draws.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// 1-based index of a failed reaction wheel.
    #[arg(long, global = true)]
    fault: Option<usize>,

    /// Log verbosity: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one guidance trajectory and write its CSVs and figures.
    Solve {
        /// Initial wheel momenta: `zero`, `near-saturation`, or
        /// comma-separated values in N·m·s (one per active wheel).
        #[arg(long)]
        h0: Option<String>,
    },
    /// Run a randomized campaign of guidance solves.
    Campaign {
        /// Number of randomized runs.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Worker threads (0 = automatic).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Rebuild aggregates and figures from a campaign's runs.csv.
    Report {
        /// Directory holding a previous campaign's outputs.
        #[arg(long = "in")]
        in_dir: PathBuf,
    },
}

fn init_logging(level: &str) -> Result<(), String> {
    let filter = match level {
        "error" => log::LevelFilter::Error,
        "warn" => log::LevelFilter::Warn,
        "info" => log::LevelFilter::Info,
        "debug" => log::LevelFilter::Debug,
        "trace" => log::LevelFilter::Trace,
        other => return Err(format!("unknown log level `{other}`")),
    };
    env_logger::Builder::new()
        .filter_level(filter)
        .format(|buf, record| writeln!(buf, "{} {} {}", record.level(), record.target(), record.args()))
        .target(env_logger::Target::Stderr)
        .init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_logging(&cli.log_level) {
        eprintln!("ERROR flyby {msg}");
        return ExitCode::from(1);
    }
    let code = match &cli.command {
        Command::Solve { h0 } => cmd_solve(&cli, h0.as_deref()),
        Command::Campaign { samples, workers } => cmd_campaign(&cli, *samples, *workers),
        Command::Report { in_dir } => cmd_report(&cli, in_dir),
    };
    ExitCode::from(code)
}

fn cmd_solve(cli: &Cli, h0: Option<&str>) -> u8 {
    let momentum = match h0.map(MomentumSpec::parse).transpose() {
        Ok(m) => m,
        Err(e) => {
            error!(target: "flyby::cli", "{e}");
            return 1;
        }
    };
    let scenario = match resolve_scenario(&cli.scenario, cli.fault, momentum.as_ref()) {
        Ok(s) => s,
        Err(e) => {
            error!(target: "flyby::cli", "scenario: {e}");
            return 1;
        }
    };
    info!(target: "flyby::solve", "scenario `{}` with {} wheels, N = {}", cli.scenario, scenario.n_wheels(), scenario.n_nodes);

    let mut backend = ClarabelBackend::default();
    let clock = WallClock::new();
    let solution = match run_scp_with(&scenario, &mut backend, &clock, par_discretize_nodes) {
        Ok(s) => s,
        Err(e) => {
            error!(target: "flyby::solve", "{e}");
            return 1;
        }
    };
    info!(
        target: "flyby::solve",
        "{} after {} iterations: visual outage {:.2} s, infrared outage {:.2} s, max error {:.3} deg",
        solution.termination.as_str(),
        solution.outer_iterations,
        solution.outages.visual_outage_s,
        solution.outages.infrared_outage_s,
        solution.outages.max_pointing_error_rad.to_degrees()
    );
    log_dense_outage(&scenario, &solution);
    match write_solve_outputs(&cli.out, &solution, &scenario) {
        Ok(files) => {
            for f in files {
                info!(target: "flyby::solve", "wrote {}", f.display());
            }
        }
        Err(e) => {
            error!(target: "flyby::solve", "writing outputs: {e}");
            return 1;
        }
    }
    match solution.termination {
        Termination::Converged => 0,
        _ => 2,
    }
}

/// Secondary diagnostic: outage evaluated on a 10× supersampled truth
/// propagation instead of the grid nodes.
fn log_dense_outage(scenario: &flyby_core::scenario::Scenario, solution: &flyby_core::scp::GuidanceSolution) {
    use flyby_core::attitude::Quat;
    let times = scenario.times();
    let dense = match flyby_core::dynamics::propagate_dense(
        &solution.x_nodes[0],
        &times,
        &solution.u_nodes,
        10,
        &scenario.plant,
        &scenario.scaling,
        &scenario.scp.truth_settings,
    ) {
        Ok(d) => d,
        Err(e) => {
            log::warn!(target: "flyby::solve", "dense outage diagnostic failed: {e}");
            return;
        }
    };
    let samples: Vec<(f64, Quat)> =
        dense.iter().map(|(t, x)| (*t, Quat::new(x[0], x[1], x[2], x[3]))).collect();
    let dt = scenario.t_f / (samples.len() - 1) as f64;
    let metrics = flyby_core::scenario::outages_from_samples(&samples, scenario, dt);
    info!(
        target: "flyby::solve",
        "dense-time outage (10x supersampled): visual {:.2} s, infrared {:.2} s",
        metrics.visual_outage_s, metrics.infrared_outage_s
    );
}

fn cmd_campaign(cli: &Cli, samples: usize, workers: usize) -> u8 {
    if samples == 0 {
        error!(target: "flyby::campaign", "--samples must be at least 1");
        return 1;
    }
    let scenario = match resolve_scenario(&cli.scenario, cli.fault, None) {
        Ok(s) => s,
        Err(e) => {
            error!(target: "flyby::campaign", "scenario: {e}");
            return 1;
        }
    };
    let config = CampaignConfig { samples, fault: cli.fault, seed: cli.seed, workers };
    info!(
        target: "flyby::campaign",
        "{} samples, seed {}, fault {:?}, {} workers",
        samples, cli.seed, cli.fault,
        if workers == 0 { "auto".to_string() } else { workers.to_string() }
    );
    let result = match run_campaign(&scenario, &config) {
        Ok(r) => r,
        Err(e) => {
            error!(target: "flyby::campaign", "{e}");
            return 1;
        }
    };
    info!(
        target: "flyby::campaign",
        "zero-visual-outage fraction {:.3}, median iterations {:.0}, {} failed runs",
        result.aggregates.zero_visual_outage_fraction,
        result.aggregates.median_iterations,
        result.aggregates.failed_runs
    );
    match write_campaign_outputs(&cli.out, &result, &config, &cli.scenario) {
        Ok(files) => {
            for f in files {
                info!(target: "flyby::campaign", "wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            error!(target: "flyby::campaign", "writing outputs: {e}");
            1
        }
    }
}

fn cmd_report(cli: &Cli, in_dir: &PathBuf) -> u8 {
    match regenerate_report(in_dir, &cli.out) {
        Ok(files) => {
            for f in files {
                info!(target: "flyby::report", "wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            error!(target: "flyby::report", "{e}");
            1
        }
    }
}
