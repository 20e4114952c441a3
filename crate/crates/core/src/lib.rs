//! Hitting-time statistics for symbolic and interval dynamical systems.
//!
//! Modules, bottom up:
//! - [`symbolic`]: words, incidence matrices, cylinders, paths and d_α;
//! - [`thermo`]: potentials, pressure, Gibbs states, samplers, and the
//!   conformal (transfer operator) construction for the Gauss system;
//! - [`coding`], [`expanding`], [`gdms`]: interval geometry of codes;
//! - [`system`]: measured systems and orbits that carry their codes;
//! - [`induction`]: first-return systems;
//! - [`hitting`]: records, entry statistics, rates, waiting tails and the
//!   divergence certificate.

// `!(x > 0.0)` is the NaN-rejecting form used throughout for parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coding;
pub mod error;
pub mod expanding;
pub mod gdms;
pub mod hitting;
pub mod induction;
pub mod maps;
pub mod seeds;
pub mod stats;
pub mod symbolic;
pub mod system;
pub mod thermo;

pub use error::{Error, Result};
