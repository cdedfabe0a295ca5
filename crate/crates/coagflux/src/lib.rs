//! Homogeneous coagulation kernels with oscillatory constant-flux
//! stationary solutions: construction, spectral fixed-point solver and
//! independent flux verification.

// negated comparisons are used to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernelspace;
pub mod numerics;
pub mod symbol;
pub mod w0builder;
pub mod spectral;
pub mod solver;
pub mod fluxcheck;
pub mod config;
pub mod io;
pub mod pipeline;

pub use error::{FluxError, Result};
