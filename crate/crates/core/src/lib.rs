//! Numerical realization of the integrated density of states (IDS) for
//! random discrete operators: site percolation and Anderson models on the
//! hypercubic lattice, and adjacency operators of Delone point sets.
//!
//! The crate is organized around one experiment pipeline:
//!
//! * [`lattice`] builds finite boxes, Folner exhaustions and percolation
//!   configurations from a deterministic counter-based RNG;
//! * [`operators`] assembles symmetric hopping operators from those
//!   configurations (or from Voronoi adjacency of a [`delone`] set) and
//!   restricts them to finite windows;
//! * [`linalg`] diagonalizes them (Householder tridiagonalization plus
//!   implicit-shift iteration);
//! * [`spectra`] turns eigenvalue lists into normalized counting functions,
//!   Laplace transforms and atomic parts;
//! * [`dos`] runs the ensemble-level estimators: empirical IDS along an
//!   exhaustion, localized-trace density of states on a padded box, trace
//!   formula / Laplace route / boundary independence / self-averaging /
//!   dichotomy checks, and the finite-cluster atom oracle.
//!
//! Everything is deterministic given the base seed: random values are pure
//! functions of (seed, counter), so results do not depend on thread count
//! or evaluation order.

pub mod delone;
pub mod dos;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod operators;
pub mod rng;
pub mod spectra;

pub use error::Error;

/// Largest matrix dimension the dense eigensolver accepts.
///
/// Boxes whose site count exceeds this are rejected with [`Error::Size`]
/// rather than silently thrashing; desk-scale experiments stay below it.
pub const DENSE_DIMENSION_LIMIT: usize = 4096;
