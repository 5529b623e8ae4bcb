//! Numerical laboratory for the capacity and expressivity of self-attention.
//!
//! The crate is `no_std` (with `alloc`) unless the default `std` feature is
//! enabled. Everything here is a pure function of its inputs; file formats,
//! worker pools and the command-line front end live in the companion `attncap`
//! crate.
//!
//! Modules:
//! - [`numerics`]: dense matrices, softmax machinery, norms, projections,
//!   near-orthonormal bases and the Lagrangian ε-split.
//! - [`attention`]: generic heads, Transformer layers, the projected deep stack
//!   and the scalar `[CLS]` readout, plus Lipschitz audit helpers.
//! - [`constructions`]: compile sparse Boolean functions into explicit
//!   bounded-norm attention (+ ReLU MLP) weights and verify them exhaustively.
//! - [`capacity`]: covering-number, Rademacher and generalization calculators.
//! - [`training`]: a small trainable 1-layer Transformer classifier with
//!   hand-written reverse-mode gradients and Adam.
//! - [`experiments`]: task generators, trial logic, threshold extraction and
//!   least-squares fits used by the scaling and parity runs.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod attention;
pub mod capacity;
pub mod constructions;
mod error;
pub mod experiments;
pub(crate) mod math;
pub mod numerics;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use numerics::Matrix;
