//! Joint search over task groupings and shared-encoder architectures for
//! multi-task learning.
//!
//! The engine trains a [`surrogate`] that predicts per-task gains for a
//! `(task combination, architecture)` pair, feeds it ground truth chosen by
//! an upper-confidence-bound [`sampler`], and finally picks a budgeted set of
//! groups with the greedy mutation search in [`derivation`]. Ground truth
//! comes from the [`evaluation`] module: either the built-in synthetic
//! oracle or an external evaluator process speaking a line-delimited JSON
//! protocol.

pub mod derivation;
pub mod error;
pub mod evaluation;
pub mod rng;
pub mod run;
pub mod sampler;
pub mod space;
pub mod surrogate;

pub use error::{Error, Result};
