//! Numerical construction and certification of constant mean curvature
//! spheres in three-dimensional metric Lie groups.
//!
//! The pipeline solves the left-invariant Gauss map equation on a
//! two-chart icosphere discretization, reconstructs immersions by frame
//! integration over a spanning tree, continues solutions in the mean
//! curvature parameter, and certifies the structural properties of the
//! resulting family: Jacobi index and nullity, Gauss map degree, the
//! quadratic-differential uniqueness certificate, symmetry under the
//! ambient isotropy group, and mesh embeddedness.

pub mod error;
pub mod field;
pub mod frame;
pub mod group;
pub mod mat2;
pub mod mesh;
pub mod pde;
pub mod potential;
pub mod quat;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod symmetry;

pub use error::{Error, Result};
