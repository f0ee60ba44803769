//! Simulation of a free-flying satellite carrying a serial manipulator, with a
//! quaternion-based adaptive non-singular terminal sliding-mode controller and
//! the baselines and Monte-Carlo campaigns used to evaluate it.

pub mod actuation;
pub mod attitude;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod kinematics;
pub mod ntsmc;
pub mod persist;
pub mod reference;

pub use error::{Error, Result};
