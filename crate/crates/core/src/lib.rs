//! Augmented primal-dual gradient dynamics (Aug-PDGD) for smooth convex programs
//!
//! ```text
//! min f(x)  s.t.  g(x) ≤ 0,  Ax = b
//! ```
//!
//! with simulation, semi-global exponential-stability certificates, the
//! non-global counterexample study and a solar-curtailment experiment.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cli;
pub mod counterexample;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod powercurtail;
pub mod problem;

pub use error::{Error, Result};
pub use problem::{ConvexProgram, Dims, PrimalDualPoint};
