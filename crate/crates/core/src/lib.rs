//! Elliptic boundary-value workbench: finite-volume dataset generation and a
//! boundary-embedded dual-branch graph neural operator.

pub mod cli;
pub mod dataset;
pub mod diff;
pub mod domain;
pub mod error;
pub mod eval;
pub mod fvm;
pub mod graph;
pub mod io;
pub mod model;
pub mod train;

pub use error::{BenoError, Result};
