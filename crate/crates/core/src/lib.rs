//! Active exploration in Markov decision processes: estimate per-state means
//! under variance-adaptive sampling. The crate provides the asymptotic
//! allocation solver over the stationary state-action polytope, an episodic
//! Frank-Wolfe learner, a faster-mixing policy heuristic, chain analysis
//! utilities, Garnet generators and an experiment lab.
//!
//! The numerical core is generic over the scalar type via [`scalar::Real`];
//! the aliases at the crate root pin `f64` for simulation and CLI use.

pub mod error;
pub mod fmh;
pub mod learner;
pub mod linalg;
pub mod mdp;
pub mod polytope;
pub mod projections;
pub mod rng;
pub mod stats;
pub mod scalar;
pub mod sim;
pub mod simlab;
pub mod simplex;
pub mod solver;

pub use error::{Error, Result};

/// `f64` aliases for the common front-end types.
pub type Mdp = mdp::MdpModel<f64>;
pub type Policy = mdp::StationaryPolicy<f64>;
pub type Chain = mdp::ChainAnalysis<f64>;
