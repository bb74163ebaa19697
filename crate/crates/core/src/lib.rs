//! Branch-and-bound laboratory for learning branching variable selection.
//!
//! This crate is `no_std` (it needs `alloc`) and holds every algorithmic
//! piece of the pipeline:
//!
//! - [`milp`]: instance model, synthetic generators and the brute-force oracle.
//! - [`lp`]: a dense bounded-variable revised simplex for node relaxations.
//! - [`bnb`]: the tree search, node selection, bound propagation and the
//!   search statistics consumed by the feature builders.
//! - [`branching`]: random, pseudocost, strong and hybrid-reliability rules.
//! - [`features`]: the 25-row candidate matrix and the 61-entry tree state.
//! - [`neural`]: NoTree and TreeGate policies, exact gradients and training.
//! - [`dataset`]: imitation data points and split-grid rules.
//! - [`metrics`]: shifted geometric means and variability scores.
//!
//! File formats, the CLI and anything touching the OS live in the companion
//! `branchlab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bnb;
pub mod branching;
pub mod dataset;
pub mod features;
pub mod lp;
pub mod metrics;
pub mod milp;
pub mod neural;
pub mod num;

pub use bnb::{
    solve, solve_with, BranchEvent, BranchObserver, Clock, NoClock, NodeEvent, SolveConfig, SolveError, SolveReport,
    SolveStatus,
};
pub use branching::Policy;
pub use milp::{MilpInstance, Sense};

/// Version tag of the 25/61 feature layout. Checkpoints record it so that a
/// model trained on one layout is never fed another.
pub const FEATURE_VERSION: &str = "bvs-c25-t61-v1";
