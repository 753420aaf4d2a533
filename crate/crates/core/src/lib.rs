//! Simulation of integer factoring with three nonlinearly coupled harmonic
//! oscillators.
//!
//! Oscillators 1 and 2 hold trial factors `n, m` in number states, oscillator
//! 3 starts in a coherent state and rotates at a frequency that depends on
//! the product `nm`. Projecting oscillator 3 onto the state it would reach
//! for `nm = N` filters the joint state of oscillators 1 and 2 towards the
//! factor pairs of `N`.

// `!(x >= bound)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod dissipative;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod state_prep;

pub use error::{Error, Result};
