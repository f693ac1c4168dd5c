//! Discrete approximations of the L2 Dirichlet form on path space over a Riemannian
//! manifold: piecewise-geodesic paths, Jacobi-field drifts, the path-space heat flow,
//! approximation measures and functional-inequality constants.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::type_complexity)]

pub mod drift;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod inequalities;
pub mod jacobi;
pub mod measures;
pub mod pathgrid;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
