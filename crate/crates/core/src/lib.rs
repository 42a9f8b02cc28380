//! Network-slice VNF placement across a heterogeneous multi-cloud.
//!
//! The crate covers the whole pipeline: the infrastructure and slice model,
//! the constraint and cost evaluator, an exact branch-and-bound solver,
//! greedy baselines, the slice-wise MDP with a from-scratch deep Q-learning
//! agent, the multi-agent scheduler, traffic profiling with the resource
//! lookup table, and the experiment harness.

pub mod constraints;
pub mod dqn;
pub mod env_model;
pub mod error;
pub mod eval;
pub mod exact;
pub mod heuristics;
pub mod marl;
pub mod mdp;
pub mod profiler;
pub mod scenario_file;

pub use constraints::{FeasibilityReport, Placement};
pub use env_model::{
    default_catalog, generate_scenario, Catalog, Cost, CostForm, InfraId, Infrastructure, LatencyModel,
    Resources, Scenario, SliceRequest, SliceType, Tier, VnfSpec,
};
pub use error::{Error, Result};
pub use exact::{solve_exact, solve_exact_with, ExactOptions, SolveResult};
