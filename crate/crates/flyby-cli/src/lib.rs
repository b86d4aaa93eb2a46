//! Host-side companion to `flyby-core`: the interior-point solver backend,
//! scenario files, trajectory/campaign persistence, native SVG plots and the
//! Monte Carlo campaign runner. The `flyby` binary wires these together.

pub mod config;
pub mod montecarlo;
pub mod parallel;
pub mod report;
pub mod solver;
pub mod svg;

use std::time::Instant;

use flyby_core::scp::Clock;

/// Monotonic wall clock backed by [`Instant`].
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock { origin: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}
