//! Static traffic assignment with link interactions.
//!
//! The crate covers the full pipeline: TNTP network and demand I/O, cost
//! models whose link times depend on weighted combinations of link flows,
//! four equilibrium algorithms (MSA, Frank-Wolfe, gradient projection and
//! Algorithm B), interaction-matrix generation, and the convergence metrics
//! used to compare partially converged solutions with an equilibrium.
//!
//! External node, zone and link indices are 1-based as in TNTP files; every
//! index inside the crate is 0-based.

pub mod cost;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod graph;
pub mod interactions;
pub mod merge;
pub mod metrics;
pub mod network;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod tntp;
pub mod weights;

pub use cost::{CostModel, LinkFunction, ModelKind};
pub use error::{Error, Result};
pub use network::{DemandMatrix, Link, Network};
pub use solver::{solve, Algorithm, FlowState, Problem, SolverConfig};
pub use sparse::SparseMatrix;
pub use weights::WeightMatrix;
