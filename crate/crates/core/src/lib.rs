//! Synthesis of interpretable temporal-filter programs for frame-level
//! behavior classification.
//!
//! Programs are drawn from a small typed grammar: an asymmetric Morlet filter
//! collapses a window of trajectory features into one value per feature, an
//! affine head selects one or two of those values and produces a logit, and a
//! disjunction sums the logits of several such filter-programs. Architectures
//! are found by best-first search over partial programs, with the open holes
//! of a partial program filled by an unconstrained temporal filter whose
//! trained error estimates the best achievable completion.
//!
//! The crate is `no_std` (with `alloc`). File formats, configuration and the
//! command-line driver live in the `tfsynth` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod data;
pub mod dsl;
pub mod eval;
pub mod filter;
mod fmt_util;
pub mod models;
pub mod rng;
pub mod search;
pub mod signal;
pub mod train;
pub mod window;

pub use dsl::{
    Architecture, HoleType, Node, NodeId, ParamBlock, ParameterStore, RuleCostTable, Signature,
};
pub use filter::{FilterCurve, MorletParams};
pub use window::{ShapeError, Window, WindowRef};
