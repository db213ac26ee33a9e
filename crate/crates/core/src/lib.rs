//! A small-scale lab for hint-guided policy-gradient training: synthetic
//! verifiable sequence tasks, a log-linear token policy, two-phase rollouts
//! with difficulty-scheduled teacher hints, difficulty-rescaled advantages
//! and per-token gradient factors for hint tokens.

mod error;

pub mod advantage;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod dynamics;
pub mod features;
pub mod hint;
pub mod modulation;
pub mod policy;
pub mod report;
pub mod rng;
pub mod rollout;
pub mod task;
pub mod trainer;

pub use error::{Error, Result};
