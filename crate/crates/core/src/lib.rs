//! Hybrid offline/online reinforcement learning with confidence-based
//! oracles.
//!
//! An oracle supplies value estimates together with an uncertainty function.
//! The hybrid loop in [`engine`] augments it with an offline dataset: it acts
//! optimistically online, then extracts a pessimistic policy. Two oracles are
//! provided, count-based value iteration for tabular MDPs ([`tabular`]) and
//! ridge regression for linear contextual bandits ([`bandit`]).

pub mod bandit;
pub mod engine;
pub mod envs;
pub mod error;
pub mod mdp;
pub mod stats;
pub mod tabular;

pub use error::{Error, Result};
