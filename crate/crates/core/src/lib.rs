//! Analytical design chain for a 1-bit reconfigurable intelligent surface.
//!
//! * [`effmedium`]: layered unit-cell model, loss participation, air-gap and via selection.
//! * [`aperture`]: array geometry, phase-gradient synthesis and 1-bit coding.
//! * [`farfield`]: coherent array sum, pattern cuts and beam metrics.
//! * [`linksim`]: QPSK over the direct plus RIS-reflected channel.
//! * [`refdata`]: bundled steering tables and deviation scoring.
//! * [`pipeline`]: codebook, pattern and peak search chained per table row.
//! * [`cli`]: the `risbeam` command-line front end.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aperture;
pub mod cli;
pub mod effmedium;
pub mod error;
pub mod farfield;
pub mod grid;
pub mod linksim;
pub mod pipeline;
pub mod refdata;

pub use error::{Error, Result};
pub use grid::Grid;
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
