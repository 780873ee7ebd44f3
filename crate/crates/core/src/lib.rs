//! Sampling of conditioned hypoelliptic Langevin bridges.
//!
//! Bridge paths of `m x'' = f(x) - x' + w'` pinned at both ends are the
//! stationary law of a fourth-order SPDE in an artificial time `τ`. The crate
//! discretizes the governing operator, samples the exact Gaussian bridge for
//! `f = 0`, evaluates the Girsanov drift, runs the spectral SPDE sampler, and
//! provides Monte-Carlo oracles plus diagnostics to check the sampler against.

pub mod error;
pub mod diagnostics;
pub mod drift;
pub mod field;
pub mod gaussian;
pub mod grid;
pub mod operator;
pub mod problem;
pub mod sampler;

pub use error::{Error, Result};
pub use field::{builtin, ForceField};
pub use grid::{finite_difference, make_grid, Path, PathGrid};
pub use operator::{assemble_operator, eigendecompose, solve_mean_path, DiscreteOperator, SpectralBasis};
pub use problem::{rescale_problem, BridgeProblem};
