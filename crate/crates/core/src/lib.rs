//! Stochastic multi-armed bandits under bi-level fairness: every group of arms
//! is guaranteed a share of the pulls at every round, and within a group arms
//! are played in proportion to their merit.
//!
//! The crate contains the BF-UCB learner and three baselines, an exact oracle
//! for the fair optimum, per-run regret and fairness accounting, and a
//! reproducible multi-run harness with a small CLI on top.

pub mod cli;
pub mod config;
pub mod confreg;
pub mod env;
pub mod fairness;
pub mod merit;
pub mod metrics;
pub mod oracle;
pub mod policies;
pub mod rng;
pub mod runner;

pub use confreg::OptimizerConfig;
pub use env::{BanditInstance, GeneratorSpec, GroupPartition, RewardKind};
pub use fairness::{FairnessConfig, Share};
pub use merit::{MeritKind, MeritSpec};
pub use oracle::OracleSummary;
pub use policies::Algorithm;
pub use runner::{run_experiment, run_once, AggregateResult, InstanceSource, RunConfig};
