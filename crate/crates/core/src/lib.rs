//! Singularly perturbed fourth-order convection problems on the unit square: discrete
//! solvers for the full and the limit problem, the boundary-layer expansion built from
//! exponential-polynomial profiles, and the measurements that check its orders.

pub mod analysis;
pub mod error;
pub mod expansion;
pub mod expr;
pub mod fd_ops;
pub mod full_solver;
pub mod linalg;
pub mod mesh;
pub mod profiles;
pub mod reduced_solver;
pub mod sparse;

pub use error::{Error, Result};
