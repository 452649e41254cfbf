//! Core analytics for the shifted Brownian fluctuation process (SBFP).
//!
//! An SBFP is a drifted Brownian motion with per-step drift slopes, observed
//! only at random epochs. The process runs until the observed increments
//! first break their monotone pattern (the first turning point). This crate
//! provides:
//!
//! - [`process`]: path simulation as a marked point process, turning-point
//!   detection and Monte Carlo estimation with reproducible substreams;
//! - [`transform`]: the Laplace-Stieltjes building blocks of the memoryless
//!   observation case, the closed-form joint functional, and Laplace-Carson
//!   inversion (exact partial fractions and Gaver-Stehfest);
//! - [`hstar`]: the optimal turning-point moment, both by the explicit
//!   transcendental equation and by stationary-point search on the inverted
//!   functional;
//! - [`game`]: the 2x2 Hold/Action vs Up/Down mixed-strategy game whose
//!   payoffs can be built from process analytics.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature instead of `std` for float math in embedded builds. IO, CSV/JSON
//! formats and the CLI live in the companion `sbfp-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("sbfp-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod game;
pub mod hstar;
pub(crate) mod math;
pub mod poly;
pub mod process;
pub mod rng;
pub mod transform;

pub use game::{Game2x2, MixedEquilibrium};
pub use hstar::{HstarProblem, HstarResult, UvaConstants};
pub use process::{
    DriftSchedule, ExitRecord, McSummary, ObservationModel, ProcessParams, SbfpPath,
};
pub use transform::{LstParams, RationalFn, TransformContext};
