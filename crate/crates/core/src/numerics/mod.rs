//! Numerical kernels: box-constrained least squares, null-space extraction,
//! a small dense LP solver and the l-infinity projection onto the box-LS
//! solution polytope.

mod box_ls;
mod linf;
mod nullspace;
pub mod simplex;

pub use box_ls::{box_ls, box_ls_from, spectral_norm_sq, BoxLsResult, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use linf::{linf_project, SolutionSet, SolutionSetKind, FACE_TOL};
pub use nullspace::{null_basis, pseudo_solve, DEFAULT_RANK_TOL};
