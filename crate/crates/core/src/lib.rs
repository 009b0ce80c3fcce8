//! Conforming P1 finite elements for Q-tensor models of nematic liquid
//! crystals with anisotropic elasticity and either the quartic Landau-de
//! Gennes or the singular Ball-Majumdar bulk potential.

// `!(x > 0.0)` checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::needless_range_loop))]

pub mod error;
pub mod fem;
pub mod manufactured;
pub mod mesh;
pub mod potential;
pub mod solver;
pub mod sparse;
pub mod sphere;
pub mod study;
pub mod tensor;

pub use error::{Error, Result};
