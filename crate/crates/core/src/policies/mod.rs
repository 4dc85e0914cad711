//! Transmit policies and offline comparators.

pub mod axl;
pub mod baselines;
pub mod oracle;
pub mod waterfill;

pub use axl::{AxlState, Variant};
pub use baselines::{
    benchmark_set, optimal_eta, sample_unit_trace_psd, uniform_profile, Benchmark, RandomizedState,
};
pub use oracle::{best_fixed_oracle, instantaneous_optimum, maximize, Objective, OracleOptions, OracleSolution};
pub use waterfill::{best_response, water_fill};
