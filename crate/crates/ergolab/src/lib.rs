//! Numerical laboratory for linear waves on stationary spacetimes with ergoregions.
//!
//! The crate evaluates explicit ergoregion metrics, builds negative-energy wave packets,
//! evolves azimuthal modes on the acoustic vortex, decomposes solutions in time frequency,
//! and constructs the radial Carleman weights together with certificates for their bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod cli_io;
pub mod error;
pub mod energy;
pub mod evolution;
pub mod frequency;
pub mod geometry;
pub mod hardy;
pub mod initial_data;

pub use error::{LabError, Result};
