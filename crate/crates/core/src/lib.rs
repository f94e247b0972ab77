//! Bounds and simulators for linear-feedback and intermittent-feedback
//! coding over the Gaussian broadcast channel with a common message.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod error;
pub mod intermittent;
pub mod linfb;
pub mod montecarlo;
pub mod report;
pub mod special;

pub use error::{Error, Result};
