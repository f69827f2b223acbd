//! Evaluation and synthesis of finite-memory randomized strategies for MDPs
//! whose long-run average objectives should also hold within bounded windows
//! along a run.
//!
//! The crate is organized bottom-up:
//! - [`mdp`], [`strategy`], [`bscc`], [`stationary`]: the model layer;
//! - [`objective`]: objectives over label frequencies;
//! - [`eval`]: exact local badness of a given strategy;
//! - [`synth`]: gradient-based synthesis of strategies;
//! - [`harness`]: instance families, baselines, sweeps and benchmarks;
//! - [`io`]: JSON file formats.

pub mod bscc;
pub mod error;
pub mod eval;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod objective;
pub mod stationary;
pub mod strategy;
pub mod synth;

pub use error::{Error, Result};
