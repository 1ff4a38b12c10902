//! Exact uniform and weighted sampling of fixed-length traces of finite
//! transition systems.
//!
//! A transition system is loaded from an AIGER circuit or an explicit
//! transition list ([`ingest`]), turned into a ladder of `2^i`-step count
//! diagrams by iterative squaring ([`ladder`]), and sampled top-down by
//! splitting every trace segment at its midpoint ([`sampler`]). The
//! [`oracle`] module holds explicit-state ground truth used to check all of
//! it.

pub mod cli;
pub mod dd;
pub mod ingest;
pub mod ladder;
pub mod oracle;
pub mod sampler;
pub mod error;
pub mod random;

pub use error::{Error, Result};
