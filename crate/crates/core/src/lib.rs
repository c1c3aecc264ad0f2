//! Relativistic stellar equilibria, their radial pulsation spectrum, and
//! Lagrangian evolution of small perturbations with a vacuum free boundary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod numerics;
pub mod eos;
pub mod error;
pub mod tov;
pub mod pulsation;
pub mod evolution;
pub mod matching;
pub mod config;
pub mod io;

pub use error::{Error, Result};
