//! Exact simulation and renewal-equation numerics for age-structured branching
//! processes, with and without immigration.
//!
//! The population is an [`AgeMeasure`]: a finite multiset of ages that all grow at
//! unit speed. A particle of age `x` dies at rate `α(x)` and leaves `k` newborns with
//! probability `p(x, k)`. Immigrant groups arrive as a Poisson stream.

pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod measure;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod validation;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use measure::AgeMeasure;
pub use model::{BranchingModel, ImmigrationMechanism, ModelConstants, OffspringLaw};
pub use sim::{simulate, simulate_branching, simulate_with_immigration, SimConfig, Trajectory};
pub use solver::{solve_pi, solve_u, SolverGrid};
