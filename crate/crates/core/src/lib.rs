//! Numerical laboratory for p-Laplace systems with absorption and locally integrable data.
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases at the crate
//! root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimate;
pub mod forcing;
pub mod grid;
pub mod io;
pub mod maximal;
pub mod operators;
pub mod scalar;
pub mod solver;
pub mod whitney;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Domain = grid::DiscreteDomain<f64>;
pub type Field = grid::Field<f64>;
pub type BoxField = grid::BoxField<f64>;
pub type Weight = maximal::Weight<f64>;
pub type Exponents = operators::ExponentSet<f64>;

pub type Domain32 = grid::DiscreteDomain<f32>;
pub type Field32 = grid::Field<f32>;
pub type Weight32 = maximal::Weight<f32>;
