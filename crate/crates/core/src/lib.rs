//! Critical beta-splitting trees and the equivalent subordinator occupancy
//! scheme: exact small-`n` laws, Monte Carlo at large `n`, and statistical
//! checks of the joint central limit theorem for leaf heights.

pub mod chain_sim;
pub mod error;
pub mod limits;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod special_fn;
pub mod subord_sim;
pub mod tree_sim;
pub mod verify;

pub use error::{Error, Result};
