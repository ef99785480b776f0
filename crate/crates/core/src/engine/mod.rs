//! Poisson arrival simulation, the online policies, the per-realization
//! offline optimum and the Monte Carlo harness.

mod arrivals;
mod monte_carlo;
mod offline;
mod policy;
pub mod rng;

pub use arrivals::{sample_arrivals, sample_arrivals_relabelled, Arrival, ArrivalSequence};
pub use monte_carlo::{
    analytic_ratio, monte_carlo, monte_carlo_with, uniform_grid, ArrivalMode, ConditionalCurve, EdgeStats,
    McConfig, RunStats, SurvivalCurve,
};
pub use offline::{max_weight_assignment, offline_optimum};
pub use policy::{run_multistage, run_suggested, MatchResult, MatchedPair, Policy};
