//! Two-dimensional inverse medium scattering: a P1 finite element Helmholtz
//! solver coupled to a Hankel series exterior, a Born initializer and a
//! recursive-linearization reconstruction marching up in wavenumber.

// `!(x > 0.0)` is the idiom used to reject NaN along with bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod born;
pub mod cli;
pub mod config;
pub mod error;
pub mod forward;
pub mod grid;
pub mod mesh;
pub mod rla;
pub mod sparse;
pub mod specfun;
pub mod synth;

pub use error::{Error, Result};
pub use num_complex::Complex64;
