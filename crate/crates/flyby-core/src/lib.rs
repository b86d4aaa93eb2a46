//! Attitude guidance trajectory optimization for high-speed flyby imaging.
//!
//! The crate computes reaction-wheel torque profiles that keep a target
//! inside the field of view of body-fixed instruments during a flyby, while
//! honoring sun exclusion, torque, momentum and angular-rate limits. The
//! non-convex pointing objective is handled by a sequential convex
//! programming loop: the rigid-body dynamics are linearized around a
//! reference trajectory, discretized exactly with state-transition-matrix
//! quadratures under a first-order-hold control, and transcribed into a
//! sparse second-order cone program that any conforming backend can solve.
//!
//! The crate is `no_std`-compatible (requires `alloc`); everything that
//! touches the operating system — the conic solver binding, file formats,
//! the Monte Carlo campaign runner and the command line — lives in the
//! companion `flyby-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attitude;
pub mod conic;
pub mod discretize;
pub mod dynamics;
pub mod error;
pub mod linearize;
pub mod ode;
pub mod pointing;
pub mod scenario;
pub mod scp;

pub use error::{Error, Result};
pub use nalgebra;
