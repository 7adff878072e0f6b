use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::{BangBangRule, ControlPolicy};
use crate::cylinder::CylinderPayoff;
use crate::error::{config, input, Result};
use crate::gfunction::ThetaSet;
use crate::gheat::{auto_grid, solve_gheat, Resolution, SolveOptions};
use crate::payoff::PayoffExpr;
use crate::sum::mean_and_se;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt_sim: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl SimConfig {
    fn validate(&self, obs: &[f64]) -> Result<()> {
        if self.n_paths == 0 {
            return config("need at least one path");
        }
        if !(self.dt_sim > 0.0) {
            return config(format!("dt_sim must be positive, got {}", self.dt_sim));
        }
        let mut prev = 0.0;
        for &t in obs {
            if t <= prev {
                return input("observation times must be positive and strictly increasing");
            }
            if self.dt_sim > (t - prev) / 10.0 + 1e-15 {
                return config(format!(
                    "dt_sim = {} exceeds a tenth of the increment {}",
                    self.dt_sim,
                    t - prev
                ));
            }
            prev = t;
        }
        Ok(())
    }

    /// Number of independent samples: pairs when antithetic.
    fn samples(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

/// The random stream of sample `index`; independent of scheduling.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs one or two (antithetic) Euler–Maruyama paths on shared normals and
/// records `B` at each observation time.
fn run(policy: &ControlPolicy, obs: &[f64], dt_sim: f64, rng: &mut ChaCha8Rng, pair: bool) -> [Vec<f64>; 2] {
    let mut x = [0.0f64; 2];
    let mut out = [Vec::with_capacity(obs.len()), Vec::with_capacity(obs.len())];
    let lanes = if pair { 2 } else { 1 };
    let mut t0 = 0.0;
    for &t1 in obs {
        let m = ((t1 - t0) / dt_sim).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / m as f64;
        let sq = dt.sqrt();
        for j in 0..m {
            let t = t0 + j as f64 * dt;
            let xi: f64 = StandardNormal.sample(rng);
            let s0 = policy.sigma(t, x[0]);
            x[0] += s0 * sq * xi;
            if pair {
                let s1 = policy.sigma(t, x[1]);
                x[1] -= s1 * sq * xi;
            }
        }
        for lane in 0..lanes {
            out[lane].push(x[lane]);
        }
        t0 = t1;
    }
    out
}

/// `B` at `obs` for every path, in path order. With antithetic sampling
/// paths `2k` and `2k + 1` share stream `k` with negated normals.
fn observe(policy: &ControlPolicy, obs: &[f64], cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate(obs)?;
    let samples = cfg.samples();
    let groups: Vec<[Vec<f64>; 2]> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_stream(cfg.seed, k as u64);
            run(policy, obs, cfg.dt_sim, &mut rng, cfg.antithetic)
        })
        .collect();
    let mut out = Vec::with_capacity(cfg.n_paths);
    for [a, b] in groups {
        out.push(a);
        if cfg.antithetic && out.len() < cfg.n_paths {
            out.push(b);
        }
    }
    Ok(out)
}

fn to_increments(levels: Vec<f64>) -> Vec<f64> {
    let mut prev = 0.0;
    levels
        .into_iter()
        .map(|b| {
            let d = b - prev;
            prev = b;
            d
        })
        .collect()
}

/// Increments `B_{t_k} − B_{t_{k−1}}` for every path.
pub fn simulate_paths(policy: &ControlPolicy, times: &[f64], cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    Ok(observe(policy, times, cfg)?
        .into_iter()
        .map(to_increments)
        .collect())
}

/// Paths sampled on the uniform grid `k·horizon/steps`, `k = 0..=steps`,
/// one Euler step per grid cell.
pub fn simulate_grid_paths(
    policy: &ControlPolicy,
    horizon: f64,
    steps: usize,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<Vec<f64>>> {
    if steps == 0 || !(horizon > 0.0) {
        return input("grid paths need steps >= 1 and a positive horizon");
    }
    if n_paths == 0 {
        return config("need at least one path");
    }
    let obs: Vec<f64> = (1..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    let dt = horizon / steps as f64;
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_stream(seed, k as u64);
            let [a, _] = run(policy, &obs, dt, &mut rng, false);
            let mut p = Vec::with_capacity(steps + 1);
            p.push(0.0);
            p.extend(a);
            p
        })
        .collect();
    Ok(paths)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub policy: String,
}

fn estimate(values: Vec<f64>, cfg: &SimConfig, label: String) -> MCEstimate {
    let n_paths = values.len();
    let samples: Vec<f64> = if cfg.antithetic {
        values.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    } else {
        values
    };
    let (mean, std_error) = mean_and_se(&samples);
    MCEstimate {
        mean,
        std_error,
        n_paths,
        policy: label,
    }
}

/// `E_P[φ(B^θ_{t₁}, …)]` for one policy.
pub fn policy_value(policy: &ControlPolicy, cp: &CylinderPayoff, cfg: &SimConfig) -> Result<MCEstimate> {
    let incs = simulate_paths(policy, cp.times(), cfg)?;
    let values: Vec<f64> = incs
        .par_iter()
        .map(|x| cp.payoff().eval_unchecked(x))
        .collect();
    Ok(estimate(values, cfg, policy.label()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBound {
    /// The largest mean; lowest index on ties.
    pub best: MCEstimate,
    pub table: Vec<MCEstimate>,
}

/// Maximum of policy values: a lower bound for the G-expectation up to
/// Monte Carlo error.
pub fn lower_bound_expectation(
    policies: &[ControlPolicy],
    cp: &CylinderPayoff,
    cfg: &SimConfig,
) -> Result<LowerBound> {
    if policies.is_empty() {
        return input("policy set is empty");
    }
    let table = policies
        .iter()
        .map(|p| policy_value(p, cp, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, e) in table.iter().enumerate() {
        if e.mean > table[best].mean {
            best = k;
        }
    }
    Ok(LowerBound {
        best: table[best].clone(),
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BangBangResult {
    pub mc: MCEstimate,
    pub pde: f64,
    pub gap: f64,
    pub scheme_tolerance: f64,
    pub passes: bool,
}

/// Number of stored slices used to build the bang-bang rule.
const BANG_BANG_SLICES: usize = 400;

/// The bang-bang policy read off the G-heat solution of a one-time payoff,
/// with the PDE value at the origin.
pub fn bang_bang_policy(phi: &PayoffExpr, theta: &ThetaSet, t: f64, pde: Resolution) -> Result<(ControlPolicy, f64)> {
    let (lo, hi) = theta.bounds()?;
    let grid = auto_grid(phi, hi, t, 0.0, pde)?;
    let every = (grid.nt / BANG_BANG_SLICES).max(1);
    let sol = solve_gheat(
        phi,
        theta,
        grid,
        SolveOptions {
            cfl: pde.cfl,
            snapshot_every: Some(every),
        },
    )?;
    let rule = BangBangRule::from_solution(&sol, lo, hi)?;
    Ok((ControlPolicy::BangBang(Arc::new(rule)), sol.at(0.0)))
}

/// Simulates under the bang-bang policy derived from the G-heat solution and
/// compares against the PDE value.
pub fn bang_bang_value(
    cp: &CylinderPayoff,
    theta: &ThetaSet,
    cfg: &SimConfig,
    pde: Resolution,
    scheme_tolerance: f64,
) -> Result<BangBangResult> {
    if cp.n() != 1 {
        return input("bang-bang reference solution needs a single payoff time");
    }
    let (policy, pde_value) = bang_bang_policy(cp.payoff(), theta, cp.times()[0], pde)?;
    let mc = policy_value(&policy, cp, cfg)?;
    let gap = mc.mean - pde_value;
    Ok(BangBangResult {
        passes: gap.abs() <= 3.0 * mc.std_error + scheme_tolerance,
        mc,
        pde: pde_value,
        gap,
        scheme_tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Compares `E[|B_t − B_s|⁴]` under `policy` with `3σ_max⁴(t−s)²`.
pub fn moment_bound_check(
    policy: &ControlPolicy,
    theta: &ThetaSet,
    s: f64,
    t: f64,
    cfg: &SimConfig,
) -> Result<MomentCheck> {
    if !(s >= 0.0 && t >= s) {
        return input(format!("need 0 <= s <= t, got s={s}, t={t}"));
    }
    let (_, hi) = theta.bounds()?;
    policy.validate(theta, t)?;
    if t == s {
        return Ok(MomentCheck {
            estimate: 0.0,
            std_error: 0.0,
            bound: 0.0,
            holds: true,
        });
    }
    let obs: Vec<f64> = if s > 0.0 { vec![s, t] } else { vec![t] };
    let paths = observe(policy, &obs, cfg)?;
    let fourth: Vec<f64> = paths
        .iter()
        .map(|p| {
            let d = if p.len() == 2 { p[1] - p[0] } else { p[0] };
            d.powi(4)
        })
        .collect();
    let est = estimate(fourth, cfg, policy.label());
    let bound = 3.0 * hi.powi(4) * (t - s).powi(2);
    let rel_se = if est.mean > 0.0 { est.std_error / est.mean } else { 0.0 };
    Ok(MomentCheck {
        estimate: est.mean,
        std_error: est.std_error,
        bound,
        holds: est.mean <= bound * (1.0 + 4.0 * rel_se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::parse;

    fn cfg(n_paths: usize, antithetic: bool) -> SimConfig {
        SimConfig {
            n_paths,
            dt_sim: 0.01,
            seed: 11,
            antithetic,
        }
    }

    fn cp(src: &str, times: Vec<f64>) -> CylinderPayoff {
        let n = times.len();
        CylinderPayoff::new(times, parse(src, n).unwrap()).unwrap()
    }

    #[test]
    fn antithetic_pairs_mirror() {
        let p = ControlPolicy::Constant(1.5);
        let incs = simulate_paths(&p, &[0.5, 1.0], &cfg(5, true)).unwrap();
        assert_eq!(incs.len(), 5);
        for k in 0..2 {
            for (a, b) in incs[2 * k].iter().zip(&incs[2 * k + 1]) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn dt_sim_is_checked() {
        let p = ControlPolicy::Constant(1.0);
        let bad = SimConfig { dt_sim: 0.2, ..cfg(4, false) };
        assert!(matches!(simulate_paths(&p, &[1.0], &bad), Err(crate::Error::Config(_))));
        assert!(simulate_paths(&p, &[1.0, 0.5], &cfg(4, false)).is_err());
        assert!(simulate_paths(&p, &[1.0], &SimConfig { n_paths: 0, ..cfg(1, false) }).is_err());
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let p = ControlPolicy::Constant(2.0);
        let c = cp("sqcap(x1, 3)", vec![1.0]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| policy_value(&p, &c, &cfg(3000, false)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn constant_volatility_matches_gaussian_moments() {
        let p = ControlPolicy::Constant(2.0);
        let e = policy_value(&p, &cp("sqcap(x1, 40)", vec![1.0]), &cfg(40_000, true)).unwrap();
        assert!((e.mean - 4.0).abs() < 4.0 * e.std_error + 1e-3, "{e:?}");
    }

    #[test]
    fn piecewise_policy_switches() {
        let p = ControlPolicy::PiecewiseConstant {
            breakpoints: vec![0.5],
            sigmas: vec![1.0, 2.0],
        };
        assert_eq!(p.sigma(0.2, 0.0), 1.0);
        assert_eq!(p.sigma(0.5, 0.0), 2.0);
        let th = ThetaSet::interval(1.0, 2.0).unwrap();
        assert!(p.validate(&th, 1.0).is_ok());
        assert!(ControlPolicy::Constant(3.0).validate(&th, 1.0).is_err());
    }

    #[test]
    fn lower_bound_picks_largest_mean() {
        let c = cp("sqcap(x1, 40)", vec![1.0]);
        let set = [ControlPolicy::Constant(1.0), ControlPolicy::Constant(2.0)];
        let lb = lower_bound_expectation(&set, &c, &cfg(4000, false)).unwrap();
        assert_eq!(lb.best.policy, "const:2");
        assert!(lower_bound_expectation(&[], &c, &cfg(10, false)).is_err());
    }

    #[test]
    fn grid_paths_start_at_zero() {
        let p = ControlPolicy::Constant(1.0);
        let paths = simulate_grid_paths(&p, 1.0, 16, 5, 3).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths.iter().all(|q| q.len() == 17 && q[0] == 0.0));
        assert_eq!(paths, simulate_grid_paths(&p, 1.0, 16, 5, 3).unwrap());
    }

    #[test]
    fn bang_bang_needs_one_time() {
        let th = ThetaSet::interval(1.0, 2.0).unwrap();
        let c = cp("sqcap(x1 + x2, 5)", vec![0.5, 1.0]);
        assert!(bang_bang_value(&c, &th, &cfg(10, false), Resolution::default(), 0.05).is_err());
    }

    #[test]
    fn fourth_moment_bound() {
        let th = ThetaSet::interval(1.0, 2.0).unwrap();
        let r = moment_bound_check(&ControlPolicy::Constant(2.0), &th, 0.2, 0.6, &cfg(20_000, false)).unwrap();
        assert!(r.holds, "{r:?}");
        assert!((r.estimate - r.bound).abs() < 6.0 * r.std_error, "{r:?}");
        assert!(moment_bound_check(&ControlPolicy::Constant(2.0), &th, 0.6, 0.2, &cfg(10, false)).is_err());
    }
}
