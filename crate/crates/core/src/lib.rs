//! Fractional sub-Laplacians on the Heisenberg group, discretized on finite
//! nilmanifold lattices, with the machinery to test fractional Leibniz rules
//! and commutator estimates numerically.
//!
//! The modules build on each other in order: [`group`] arithmetic,
//! [`lattice`] grids and the discrete sub-Laplacian, the [`spectral`]
//! calculus, [`kernels`] and group convolution, the [`commutators`], the
//! [`multipliers`] of the continuum operators, and the [`harness`] that runs
//! ratio and refinement studies.

pub mod commutators;
pub mod context;
pub mod error;
pub mod group;
pub mod harness;
pub mod kernels;
pub mod lattice;
pub mod multipliers;
pub mod spectral;

pub use context::LatticeContext;
pub use error::{Error, Result};
