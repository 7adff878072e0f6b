//! Monte Carlo under volatility-controlled paths `B^θ_t = ∫₀ᵗ θ_s dW_s`.
//!
//! Any adapted `θ` with values in `[σ_min, σ_max]` gives a classical
//! expectation that is a lower bound for the G-expectation; the bang-bang
//! policy read off a G-heat solution nearly attains it.

mod policy;
mod sim;

pub use policy::{BangBangRule, ControlPolicy};
pub use sim::{
    bang_bang_policy, bang_bang_value, lower_bound_expectation, moment_bound_check, path_stream, policy_value,
    simulate_grid_paths, simulate_paths, BangBangResult, LowerBound, MCEstimate, MomentCheck,
    SimConfig,
};
