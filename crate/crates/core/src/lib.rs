//! Numerical toolkit for one-dimensional CD(K,N) calculus, model
//! isoperimetric profiles and L¹ needle decompositions of finite metric
//! measure spaces, used to test quantitative Lévy–Gromov estimates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod density1d;
pub mod error;
pub mod extended;
pub mod intervals;
pub mod localize;
pub mod profile;
pub mod quad;
pub mod spaces;

pub use error::{Error, Result};
pub use extended::ExtendedReal;
