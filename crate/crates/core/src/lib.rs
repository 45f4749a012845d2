//! Steady-state power system analysis.
//!
//! The crate covers the chain from network data to a cleaned state estimate:
//!
//! * [`network`]: bus/branch model with the unified π branch, AC admittance
//!   and DC susceptance matrices that can be patched in place;
//! * [`io`]: MATPOWER case import, JSON snapshots and measurement CSV files;
//! * [`powerflow`] and [`opf`]: Newton-Raphson, fast decoupled (XB/BX),
//!   Gauss-Seidel and DC power flow, and DC optimal power flow;
//! * [`measurement`]: measurement sets generated from solved states;
//! * [`observability`]: observable islands, restoration with
//!   pseudo-measurements and optimal PMU placement;
//! * [`estimation`] and [`baddata`]: WLS (normal equations, orthogonal,
//!   Peters-Wilkinson) and LAV estimators for the AC, PMU-only and DC models,
//!   chi-squared detection and largest normalized residual identification;
//! * [`qss`]: quasi-steady-state sequences that reuse matrices,
//!   factorizations and previous solutions between steps.
//!
//! The numerical kernels live in [`sparse`] (CSC matrices, LU, QR, selected
//! inverse) and [`lp`] (revised simplex and binary branch-and-bound).

pub mod baddata;
pub mod cli;
pub mod estimation;
pub mod functions;
pub mod io;
pub mod lp;
pub mod measurement;
pub mod network;
pub mod observability;
pub mod opf;
pub mod powerflow;
pub mod qss;
pub mod report;
pub mod sparse;
pub mod stats;
pub mod synthetic;

mod error;

pub use error::Error;
pub use measurement::{Measurement, MeasurementKind, MeasurementSet};
pub use network::{Branch, Bus, BusKind, Generator, PowerSystem};
