//! Numerical laboratory for convex-body geometry driven by k-Hessian torsion.
//!
//! The crate is organized in layers:
//!
//! * [`sphere`] — quadrature grids and covariant differential operators on
//!   S^{n-1} for n in {2, 3};
//! * [`body`] — support/radial calculus for convex bodies, Wulff shapes,
//!   convex hulls, Gauss maps and curvature functions;
//! * [`torsion`] — Dirichlet solvers for S_k(D^2 u) = 1 on embedded Cartesian
//!   grids (with a body-fitted polar backend for n = 2) plus closed-form ball
//!   oracles;
//! * [`functionals`] — torsional rigidities, dual rigidities and the dual
//!   torsional measures, with consistency audits between their normal- and
//!   radial-parameter forms;
//! * [`variation`] — logarithmic families of Wulff shapes and convex hulls and
//!   a finite-difference harness auditing the variational formulas;
//! * [`flow`] — time integration of the normalized support-function flow with
//!   invariant monitors and a convergence criterion.

pub mod body;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod la;
pub mod sphere;
pub mod torsion;
pub mod variation;

pub use error::{Error, Result};
