//! Meta-reinforcement learning for simulated peg-in-hole insertion.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: analytic square-peg/square-hole simulator and the randomized task family.
//! - [`nn`]: small feed-forward networks with hand-written reverse mode, Adam and
//!   finite-difference checking.
//! - [`sac`]: soft actor-critic with twin critics and per-task replay.
//! - [`pearl`]: latent-context meta-training and inference-only adaptation.
//! - [`baselines`]: scripted straight-down, random and spiral search.
//! - [`grasp`]: grasp-offset estimation by normalized cross-correlation.
//! - [`bench`]: evaluation suites, reports and the command line front end.

pub mod baselines;
pub mod bench;
pub mod env;
pub mod grasp;
pub mod nn;
pub mod pearl;
pub mod rng;
pub mod sac;

pub use bench::cli::cli_dispatch;
