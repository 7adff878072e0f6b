//! Backward dynamic programming for cylinder payoffs
//! `𝔼[φ(B_{t₁}, B_{t₂} − B_{t₁}, …, B_{tₙ} − B_{tₙ₋₁})]`.
//!
//! The payoff is tabulated on a tensor grid of increment coordinates. The
//! last coordinate is integrated out first: for every prefix node the line
//! along that axis is used as initial data of a G-heat solve over the
//! increment's duration and read off at increment 0. Repeating this down to
//! the first axis leaves a scalar.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};
use crate::gfunction::ThetaSet;
use crate::gheat::{interpolate, solve_values, Grid1D, SolveOptions, DEFAULT_CFL, WIDTH_SIGMAS};
use crate::payoff::PayoffExpr;

pub const MAX_INCREMENTS: usize = 3;

/// A payoff of the increments of `B` at `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderPayoff {
    times: Vec<f64>,
    payoff: PayoffExpr,
}

impl CylinderPayoff {
    pub fn new(times: Vec<f64>, payoff: PayoffExpr) -> Result<Self> {
        if times.is_empty() || times.len() > MAX_INCREMENTS {
            return input(format!(
                "need between 1 and {MAX_INCREMENTS} payoff times, got {}",
                times.len()
            ));
        }
        if times.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return input("payoff times must be positive and finite");
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return input(format!("payoff times must be strictly increasing: {times:?}"));
        }
        if payoff.arity() != times.len() {
            return input(format!(
                "payoff has arity {} but {} times were given",
                payoff.arity(),
                times.len()
            ));
        }
        Ok(Self { times, payoff })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn payoff(&self) -> &PayoffExpr {
        &self.payoff
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    /// Durations `t_k − t_{k−1}` with `t_0 = 0`.
    pub fn durations(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderResolution {
    /// Nodes per axis; `None` picks a default by the number of increments.
    pub nx: Option<usize>,
    /// Per-axis overrides of `nx`.
    pub nx_per_axis: Option<Vec<usize>>,
    pub cfl: f64,
}

impl Default for CylinderResolution {
    fn default() -> Self {
        Self {
            nx: None,
            nx_per_axis: None,
            cfl: DEFAULT_CFL,
        }
    }
}

impl CylinderResolution {
    pub fn with_nx(nx: usize) -> Self {
        Self {
            nx: Some(nx),
            ..Self::default()
        }
    }

    fn nx_for(&self, axis: usize, n: usize) -> usize {
        if let Some(v) = self.nx_per_axis.as_ref().and_then(|v| v.get(axis)) {
            return *v;
        }
        self.nx.unwrap_or(match n {
            1 => 2001,
            2 => 401,
            _ => 81,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderValue {
    pub value: f64,
    /// One grid per increment axis.
    pub grids: Vec<Grid1D>,
}

impl CylinderValue {
    /// `max(h, dt)` over all axes.
    pub fn step_scale(&self) -> f64 {
        self.grids
            .iter()
            .map(|g| g.h().max(g.dt()))
            .fold(0.0, f64::max)
    }
}

/// Axis grids used by [`evaluate_cylinder`].
pub fn axis_grids(cp: &CylinderPayoff, sigma_max: f64, res: &CylinderResolution) -> Result<Vec<Grid1D>> {
    let hint = cp.payoff.support_hint();
    cp.durations()
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let nx = res.nx_for(k, cp.n());
            if nx < 3 {
                return config(format!("axis {k} needs at least 3 nodes"));
            }
            let w = WIDTH_SIGMAS * sigma_max * d.sqrt() + hint;
            Grid1D::centred(0.0, w, nx, d, sigma_max, res.cfl)
        })
        .collect()
}

pub fn evaluate_cylinder(cp: &CylinderPayoff, theta: &ThetaSet, res: &CylinderResolution) -> Result<CylinderValue> {
    let (lo, hi) = theta.bounds()?;
    let grids = axis_grids(cp, hi, res)?;
    let n = cp.n();
    let nodes: Vec<Vec<f64>> = grids.iter().map(Grid1D::nodes).collect();

    // Row-major tensor, last axis fastest.
    let total: usize = grids.iter().map(|g| g.nx).product();
    let mut tensor: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut point = [0.0; MAX_INCREMENTS];
            let mut rem = flat;
            for k in (0..n).rev() {
                point[k] = nodes[k][rem % grids[k].nx];
                rem /= grids[k].nx;
            }
            cp.payoff.eval_unchecked(&point[..n])
        })
        .collect();

    let opts = SolveOptions {
        cfl: res.cfl,
        snapshot_every: None,
    };
    for k in (0..n).rev() {
        let g = grids[k];
        tensor = tensor
            .par_chunks(g.nx)
            .map(|line| {
                let sol = solve_values(line.to_vec(), lo, hi, g, opts)?;
                Ok(interpolate(&g, &sol.values, 0.0))
            })
            .collect::<Result<Vec<f64>>>()?;
    }
    debug_assert_eq!(tensor.len(), 1);
    Ok(CylinderValue {
        value: tensor[0],
        grids,
    })
}

/// Direct and split evaluations of the same payoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DppCheck {
    pub direct: f64,
    pub split: f64,
    /// `3·max(h, dt)·Lipschitz` over both runs.
    pub tolerance: f64,
    pub passes: bool,
}

/// Evaluates `cp` directly and again with an extra payoff time inserted at
/// `split_point`; the payoff only sees the sum of the two new increments.
pub fn dpp_consistency_check(
    cp: &CylinderPayoff,
    theta: &ThetaSet,
    split_point: f64,
    res: &CylinderResolution,
) -> Result<DppCheck> {
    if cp.n() + 1 > MAX_INCREMENTS {
        return input(format!(
            "splitting a {}-increment payoff exceeds the {MAX_INCREMENTS}-increment limit",
            cp.n()
        ));
    }
    let mut prev = 0.0;
    let mut slot = None;
    for (k, &t) in cp.times.iter().enumerate() {
        if prev < split_point && split_point < t {
            slot = Some(k);
            break;
        }
        prev = t;
    }
    let Some(k) = slot else {
        return input(format!(
            "split point {split_point} is not strictly between consecutive payoff times"
        ));
    };
    let mut times = cp.times.clone();
    times.insert(k, split_point);
    let split_cp = CylinderPayoff::new(times, cp.payoff.split_increment(k)?)?;

    let mut split_res = res.clone();
    if let Some(v) = split_res.nx_per_axis.as_mut() {
        if k < v.len() {
            let nx = v[k];
            v.insert(k, nx);
        }
    }
    if split_res.nx.is_none() {
        split_res.nx = Some(res.nx_for(0, cp.n()));
    }
    let direct = evaluate_cylinder(cp, theta, res)?;
    let split = evaluate_cylinder(&split_cp, theta, &split_res)?;
    let lip = cp.payoff.structural_lipschitz();
    let tolerance = 3.0 * direct.step_scale().max(split.step_scale()) * lip;
    Ok(DppCheck {
        direct: direct.value,
        split: split.value,
        tolerance,
        passes: (direct.value - split.value).abs() <= tolerance + 1e-12,
    })
}
