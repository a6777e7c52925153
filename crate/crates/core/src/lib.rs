//! Markov-basis-free sampling of lattice fibers.
//!
//! A fiber is the set of nonnegative integer tables sharing the margins of an
//! observed table under a log-linear model. This crate builds the model
//! design matrix, a lattice basis of its kernel, a fiber-walk MDP, a small
//! actor-critic learner whose policy proposes moves, and Metropolis-Hastings
//! sampling with Besag-Clifford p-values on top of it.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agent;
pub mod error;
pub mod lattice;
pub mod mdp;
pub mod models;
pub mod nn;
pub mod point;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use point::{FiberPoint, Label};
pub use lattice::{LatticeBasis, Move};
pub use models::{DesignMatrix, ModelFamily, ModelSpec, ObservedData};
