//! Tabular imitation learning on layered finite-horizon MDPs.
//!
//! Every expectation over the MDP is computed exactly by dynamic programming;
//! randomness enters only through demonstration sampling and online replay.

#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod config;
pub mod demos;
pub mod error;
pub mod instances;
pub mod mdp;
pub mod solvers;
pub mod suites;
pub mod verify;

pub use error::{Error, Result};
