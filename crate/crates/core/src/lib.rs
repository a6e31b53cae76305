//! Inverse curvature flows of strictly convex surfaces in the three space
//! forms, simulated through the support function on the round sphere.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod curvfn;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod hypersurface;
pub mod oracle;
pub mod sphgrid;

pub use error::{IcfError, Result};
