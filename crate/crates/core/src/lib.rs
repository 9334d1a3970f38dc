//! Seeded simulator of asynchronous, tree-based multipartite entanglement
//! routing (MAER) on quantum repeater networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`topology`]: physical graphs, hop distances, consumer placement;
//! * [`resources`]: the live-link pool with coherence expiry and the
//!   success probability of a delivery tree;
//! * [`dodag`]: the root-anchored tree grown over live links;
//! * [`engines`]: per-slot drivers for MAER and the synchronous baseline;
//! * [`verifier`]: a small state-vector simulator checking swap, fusion and
//!   fan-out;
//! * [`harness`]: configuration, parameter sweeps, CSV output and the CLI.
//!
//! Trials are independent and run on the rayon pool when the `parallel`
//! feature is enabled (the default); see [`parallel::Execution`].

pub mod dodag;
pub mod engines;
pub mod error;
pub mod harness;
pub mod parallel;
pub mod resources;
pub mod rng;
pub mod stats;
pub mod topology;
pub mod verifier;

pub use error::{Error, Result};
