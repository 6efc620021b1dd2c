#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Radial degenerate Keller–Segel dynamics through the mass-accumulation
//! function: simulation, density reconstruction, blow-up thresholds and
//! invariant checks.

pub mod barriers;
pub mod blowup;
pub mod cli;
pub mod error;
pub mod fd;
pub mod io;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
