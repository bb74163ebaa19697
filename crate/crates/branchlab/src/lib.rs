//! Files, pipeline stages and the command line around `branchlab-core`.
//!
//! - [`mps`]: free-format MPS reader and writer.
//! - [`io`]: instance files, suite indices and atomic writes.
//! - [`shard`]: imitation shards (JSON lines or compact binary) and their manifest.
//! - [`checkpoint`]: versioned model checkpoints.
//! - [`collect`]: expert rollouts and split assembly.
//! - [`train`]: imitation training on assembled splits.
//! - [`eval`]: policy evaluation runs and node-count tables.
//! - [`cli`]: the `branchlab` binary.

pub mod checkpoint;
pub mod cli;
pub mod collect;
pub mod config;
pub mod eval;
pub mod io;
pub mod mps;
pub mod run;
pub mod shard;
pub mod train;
