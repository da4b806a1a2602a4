//! Unification of semantically similar measurement constructs.
//!
//! The pipeline learns a task-specific similarity over pretrained text
//! embeddings ([`projection`]), turns it into a similarity graph
//! ([`simgraph`]), produces candidate partitions with several clustering
//! methods ([`clustering`]) and selects among them under an explicit
//! parsimony/purity trade-off ([`objective`]). [`metrics`] scores both the
//! similarity model and the partitions against gold labels.

pub mod binfmt;
pub mod clustering;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod metrics;
pub mod objective;
pub mod projection;
pub mod simgraph;
pub mod synth;

pub use error::{Error, Result};
