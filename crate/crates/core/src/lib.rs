//! Shape optimization of an obstacle in two-dimensional Stokes flow by the
//! method of mappings: the domain is parametrized as `τ(Ω) = (id + w)(Ω)`
//! over a fixed reference mesh and the full optimality system is solved by
//! a semismooth Newton method inside an α-continuation.

// Element loops index several local arrays at once; `!(x > 0.0)` style
// checks are meant to reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constraints;
pub mod deform;
pub mod derivcheck;
pub mod error;
pub mod fem;
pub mod flow;
pub mod kkt;
pub mod mesh;
pub mod output;
pub mod run;
pub mod solver;
#[doc(hidden)]
pub mod testing;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
