//! Online learning over combinatorial decision sets: Hedge and online mirror
//! descent over m-sets, multitask product sets and DAG path sets, the matching
//! adversarial hard instances, and an experiment harness.

pub mod adversaries;
pub mod domain;
pub mod error;
pub mod harness;
pub mod learners;
pub mod regularizers;
pub mod sampling;

pub use error::{Error, Result};
