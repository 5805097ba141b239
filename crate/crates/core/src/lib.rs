//! Embedding-table placement planning and lookup simulation for clusters of
//! UPMEM-style DPUs.
//!
//! The pipeline: profile an item-access trace ([`trace`]), optionally mine
//! co-occurring hot groups worth caching as partial sums ([`cache`]), plan
//! item placement across row groups of DPUs ([`partition`]), then execute
//! batched lookups against the plan ([`engine`]) with latency charged from a
//! calibrated cost model ([`costmodel`]). Outputs are exact: the simulated
//! forward pass reproduces the naive reference reduction bit-for-bit.

pub mod cache;
pub mod costmodel;
pub mod engine;
pub mod error;
pub mod model;
pub mod partition;
pub mod trace;

pub use error::{Error, Result};
