use std::sync::Arc;

use crate::error::{config, input, Result};
use crate::gheat::{GridSolution, Snapshot};
use crate::gfunction::ThetaSet;

/// Second differences of `u(τ, ·)` for the slices of a G-heat solve,
/// indexed by time to maturity `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BangBangRule {
    x_min: f64,
    h: f64,
    horizon: f64,
    sigma_min: f64,
    sigma_max: f64,
    taus: Vec<f64>,
    /// `convex[s][i]`: whether `Δ²u ≥ 0` at node `i` of slice `s`.
    convex: Vec<Vec<bool>>,
}

impl BangBangRule {
    /// Builds the rule from a solution with stored snapshots covering
    /// `[0, horizon]`.
    pub fn from_solution(sol: &GridSolution, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        let snaps: &[Snapshot] = &sol.snapshots;
        let horizon = sol.grid.t_end;
        let covers = snaps.len() >= 2
            && snaps[0].t == 0.0
            && (snaps[snaps.len() - 1].t - horizon).abs() <= 1e-9 * horizon.max(1.0);
        if !covers {
            return config("bang-bang policy needs stored snapshots covering [0, T]");
        }
        let nx = sol.grid.nx;
        let convex = snaps
            .iter()
            .map(|s| {
                (0..nx)
                    .map(|i| {
                        if i == 0 || i + 1 == nx {
                            true
                        } else {
                            (s.values[i + 1] - s.values[i]) - (s.values[i] - s.values[i - 1]) >= 0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            x_min: sol.grid.x_min,
            h: sol.grid.h(),
            horizon,
            sigma_min,
            sigma_max,
            taus: snaps.iter().map(|s| s.t).collect(),
            convex,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `σ_max` where the value function is locally convex, else `σ_min`.
    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        let tau = (self.horizon - t).max(0.0);
        let k = match self.taus.binary_search_by(|p| p.partial_cmp(&tau).unwrap()) {
            Ok(k) => k,
            Err(0) => 0,
            Err(k) if k >= self.taus.len() => self.taus.len() - 1,
            Err(k) => {
                if tau - self.taus[k - 1] <= self.taus[k] - tau {
                    k - 1
                } else {
                    k
                }
            }
        };
        let row = &self.convex[k];
        let s = ((x - self.x_min) / self.h).round();
        let i = if s <= 1.0 {
            1
        } else {
            (s as usize).min(row.len() - 2)
        };
        if row[i] {
            self.sigma_max
        } else {
            self.sigma_min
        }
    }
}

/// An adapted volatility rule.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlPolicy {
    Constant(f64),
    /// `sigmas[j]` on `[breakpoints[j-1], breakpoints[j])`; one more sigma
    /// than breakpoints.
    PiecewiseConstant { breakpoints: Vec<f64>, sigmas: Vec<f64> },
    BangBang(Arc<BangBangRule>),
}

impl ControlPolicy {
    pub fn label(&self) -> String {
        match self {
            ControlPolicy::Constant(s) => format!("const:{s}"),
            ControlPolicy::PiecewiseConstant { breakpoints, sigmas } => {
                format!("piecewise:{breakpoints:?}:{sigmas:?}")
            }
            ControlPolicy::BangBang(_) => "bangbang".to_string(),
        }
    }

    /// Checks every volatility lies in `theta` and, for bang-bang, that the
    /// reference solution covers `horizon`.
    pub fn validate(&self, theta: &ThetaSet, horizon: f64) -> Result<()> {
        let (lo, hi) = theta.bounds()?;
        let inside = |s: f64| s >= lo - 1e-12 && s <= hi + 1e-12;
        match self {
            ControlPolicy::Constant(s) => {
                if !inside(*s) {
                    return input(format!("volatility {s} outside [{lo}, {hi}]"));
                }
            }
            ControlPolicy::PiecewiseConstant { breakpoints, sigmas } => {
                if sigmas.len() != breakpoints.len() + 1 {
                    return input("piecewise policy needs one more sigma than breakpoints");
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return input("piecewise breakpoints must be increasing");
                }
                if let Some(s) = sigmas.iter().find(|s| !inside(**s)) {
                    return input(format!("volatility {s} outside [{lo}, {hi}]"));
                }
            }
            ControlPolicy::BangBang(rule) => {
                if rule.horizon + 1e-12 < horizon {
                    return config(format!(
                        "bang-bang snapshots cover [0, {}] but horizon is {horizon}",
                        rule.horizon
                    ));
                }
                if !inside(rule.sigma_min) || !inside(rule.sigma_max) {
                    return input("bang-bang volatilities outside the uncertainty set");
                }
            }
        }
        Ok(())
    }

    /// Volatility on `[t, t + dt)` given the state at `t`.
    #[inline]
    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        match self {
            ControlPolicy::Constant(s) => *s,
            ControlPolicy::PiecewiseConstant { breakpoints, sigmas } => {
                let j = breakpoints.partition_point(|b| *b <= t);
                sigmas[j]
            }
            ControlPolicy::BangBang(rule) => rule.sigma(t, x),
        }
    }
}
