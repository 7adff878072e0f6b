//! Explicit monotone finite differences for the 1-D G-heat equation
//! `∂u/∂t = G(∂²u/∂x²)`, `u(0, ·) = φ`.
//!
//! With `G(a) = ½(σ_max² a⁺ − σ_min² a⁻)` the update
//! `uᵢ ← uᵢ + dt·G(Δ²ₕuᵢ)` is monotone whenever `dt ≤ h²/σ_max²`. The two
//! boundary nodes use a zero second difference, i.e. they keep their initial
//! value (linear extrapolation); the truncation width is chosen so that the
//! boundary sits many standard deviations away from the probe.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::gfunction::ThetaSet;
use crate::payoff::PayoffExpr;

pub const DEFAULT_CFL: f64 = 0.9;
pub const DEFAULT_NX: usize = 2001;
/// Half-width of the truncation box in units of `σ_max √t`.
pub const WIDTH_SIGMAS: f64 = 8.0;

/// Space-time grid on `[x_min, x_max] × [0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_end: f64,
    pub nt: usize,
}

impl Grid1D {
    /// Picks the smallest `nt` satisfying `dt ≤ cfl·h²/σ_max²`.
    pub fn with_cfl(
        x_min: f64,
        x_max: f64,
        nx: usize,
        t_end: f64,
        sigma_max: f64,
        cfl: f64,
    ) -> Result<Self> {
        if !(x_min < x_max) || nx < 3 {
            return config(format!("need x_min < x_max and nx >= 3, got [{x_min}, {x_max}], nx={nx}"));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return config(format!("t_end must be positive, got {t_end}"));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return config(format!("cfl factor must lie in (0, 1], got {cfl}"));
        }
        let h = (x_max - x_min) / (nx - 1) as f64;
        let nt = if sigma_max > 0.0 {
            let dt_max = cfl * h * h / (sigma_max * sigma_max);
            ((t_end / dt_max).ceil() as usize).max(1)
        } else {
            1
        };
        Ok(Self {
            x_min,
            x_max,
            nx,
            t_end,
            nt,
        })
    }

    /// Grid centred on `x` with half-width `width`.
    pub fn centred(x: f64, width: f64, nx: usize, t_end: f64, sigma_max: f64, cfl: f64) -> Result<Self> {
        Self::with_cfl(x - width, x + width, nx, t_end, sigma_max, cfl)
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn check_cfl(&self, sigma_max: f64, cfl: f64) -> Result<()> {
        if self.nx < 3 || !(self.x_min < self.x_max) || self.nt == 0 || !(self.t_end > 0.0) {
            return config("grid needs nx >= 3, nt >= 1, x_min < x_max and t_end > 0");
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return config(format!("cfl factor must lie in (0, 1], got {cfl}"));
        }
        let limit = cfl * self.h() * self.h() / (sigma_max * sigma_max);
        if self.dt() > limit * (1.0 + 1e-12) {
            return config(format!(
                "CFL violated: dt = {:.3e} > {cfl}·h²/σ_max² = {:.3e}",
                self.dt(),
                limit
            ));
        }
        Ok(())
    }
}

/// Linear interpolation of nodal values; constant extension outside.
pub fn interpolate(grid: &Grid1D, values: &[f64], x: f64) -> f64 {
    if x <= grid.x_min {
        return values[0];
    }
    if x >= grid.x_max {
        return values[grid.nx - 1];
    }
    let s = (x - grid.x_min) / grid.h();
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        return values[r as usize];
    }
    let i = (s.floor() as usize).min(grid.nx - 2);
    let w = s - i as f64;
    (1.0 - w) * values[i] + w * values[i + 1]
}

/// One explicit time stepper; exposes intermediate slices so callers can
/// check properties at every step.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid1D,
    sigma_min: f64,
    sigma_max: f64,
    u: Vec<f64>,
    next: Vec<f64>,
    step: usize,
}

impl Stepper {
    pub fn new(initial: Vec<f64>, sigma_min: f64, sigma_max: f64, grid: Grid1D, cfl: f64) -> Result<Self> {
        if initial.len() != grid.nx {
            return config(format!(
                "initial data has {} values for {} nodes",
                initial.len(),
                grid.nx
            ));
        }
        grid.check_cfl(sigma_max, cfl)?;
        if let Some(i) = initial.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: 0,
                msg: format!("non-finite initial value at node {i}"),
            });
        }
        let next = initial.clone();
        Ok(Self {
            grid,
            sigma_min,
            sigma_max,
            u: initial,
            next,
            step: 0,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn done(&self) -> bool {
        self.step >= self.grid.nt
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.grid.dt()
    }

    pub fn step(&mut self) -> Result<()> {
        let n = self.grid.nx;
        let h = self.grid.h();
        let coef = self.grid.dt() / (h * h);
        let (lo2, hi2) = (self.sigma_min * self.sigma_min, self.sigma_max * self.sigma_max);
        let u = &self.u;
        let next = &mut self.next;
        next[0] = u[0];
        next[n - 1] = u[n - 1];
        let mut bad = false;
        for i in 1..n - 1 {
            let d2 = (u[i + 1] - u[i]) - (u[i] - u[i - 1]);
            let s2 = if d2 >= 0.0 { hi2 } else { lo2 };
            let v = u[i] + 0.5 * s2 * coef * d2;
            bad |= !v.is_finite();
            next[i] = v;
        }
        self.step += 1;
        if bad {
            let i = next.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(Error::Numerical {
                step: self.step,
                msg: format!("non-finite value at node {i}"),
            });
        }
        std::mem::swap(&mut self.u, &mut self.next);
        Ok(())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

/// `u(t_end, ·)` on the grid, with optional intermediate slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    /// Slices `u(t, ·)` in increasing `t`, starting at `t = 0` and ending at
    /// `t_end`, when requested.
    pub snapshots: Vec<Snapshot>,
    pub warnings: Vec<String>,
}

impl GridSolution {
    pub fn at(&self, x: f64) -> f64 {
        interpolate(&self.grid, &self.values, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub cfl: f64,
    /// Store a snapshot every this many steps (plus the first and last).
    pub snapshot_every: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            cfl: DEFAULT_CFL,
            snapshot_every: None,
        }
    }
}

/// Solves from nodal initial data.
pub fn solve_values(
    initial: Vec<f64>,
    sigma_min: f64,
    sigma_max: f64,
    grid: Grid1D,
    opts: SolveOptions,
) -> Result<GridSolution> {
    let mut stepper = Stepper::new(initial, sigma_min, sigma_max, grid, opts.cfl)?;
    let mut snapshots = Vec::new();
    let every = opts.snapshot_every.filter(|k| *k > 0);
    if every.is_some() {
        snapshots.push(Snapshot {
            t: 0.0,
            values: stepper.values().to_vec(),
        });
    }
    while !stepper.done() {
        stepper.step()?;
        if let Some(k) = every {
            if stepper.steps_taken() % k == 0 || stepper.done() {
                snapshots.push(Snapshot {
                    t: stepper.time(),
                    values: stepper.values().to_vec(),
                });
            }
        }
    }
    let mut warnings = Vec::new();
    if sigma_min == 0.0 {
        warnings.push("degenerate generator: σ_min = 0 (G is not uniformly elliptic)".to_string());
    }
    Ok(GridSolution {
        grid,
        values: stepper.into_values(),
        snapshots,
        warnings,
    })
}

fn one_d(phi: &PayoffExpr) -> Result<()> {
    if phi.arity() != 1 {
        return config(format!("G-heat solver takes a 1-argument payoff, got arity {}", phi.arity()));
    }
    Ok(())
}

/// Solves the G-heat equation with initial data `phi` sampled on `grid`.
pub fn solve_gheat(phi: &PayoffExpr, theta: &ThetaSet, grid: Grid1D, opts: SolveOptions) -> Result<GridSolution> {
    one_d(phi)?;
    let (lo, hi) = theta.bounds()?;
    let init: Vec<f64> = (0..grid.nx).map(|i| phi.eval_unchecked(&[grid.x(i)])).collect();
    solve_values(init, lo, hi, grid, opts)
}

/// Resolution controls for the convenience wrappers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub nx: usize,
    pub cfl: f64,
    /// Overrides the automatic half-width `8σ_max√t + support hint`.
    pub domain_width: Option<f64>,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            nx: DEFAULT_NX,
            cfl: DEFAULT_CFL,
            domain_width: None,
        }
    }
}

impl Resolution {
    pub fn width(&self, sigma_max: f64, t: f64, hint: f64) -> f64 {
        self.domain_width
            .unwrap_or(WIDTH_SIGMAS * sigma_max * t.sqrt() + hint)
    }
}

/// The grid `g_normal_expectation` would use.
pub fn auto_grid(phi: &PayoffExpr, sigma_max: f64, t: f64, x: f64, res: Resolution) -> Result<Grid1D> {
    let mut w = res.width(sigma_max, t, phi.support_hint());
    if !(w > 0.0) {
        w = 1.0;
    }
    Grid1D::centred(x, w, res.nx, t, sigma_max, res.cfl)
}

/// `𝔼[φ(x + √t X)]` for G-normal `X`, read off the grid solution.
pub fn g_normal_expectation(phi: &PayoffExpr, theta: &ThetaSet, t: f64, x: f64, res: Resolution) -> Result<f64> {
    one_d(phi)?;
    let (_, hi) = theta.bounds()?;
    if t == 0.0 {
        return Ok(phi.eval_unchecked(&[x]));
    }
    if !(t > 0.0) {
        return config(format!("time must be nonnegative, got {t}"));
    }
    let grid = auto_grid(phi, hi, t, x, res)?;
    Ok(solve_gheat(phi, theta, grid, SolveOptions { cfl: res.cfl, snapshot_every: None })?.at(x))
}

/// Zero mean and variance envelope of G-Brownian motion at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCertainty {
    /// `𝔼[clamp(B_t, −K, K)]`
    pub mean_upper: f64,
    /// `𝔼[−clamp(B_t, −K, K)]`
    pub neg_mean_upper: f64,
    /// `𝔼[min(B_t², K²)]`, close to `σ_max² t`
    pub var_upper: f64,
    /// `−𝔼[−min(B_t², K²)]`, close to `σ_min² t`
    pub var_lower: f64,
    pub cap: f64,
}

pub fn mean_certainty_checks(theta: &ThetaSet, t: f64, res: Resolution) -> Result<MeanCertainty> {
    let (_, hi) = theta.bounds()?;
    let cap = WIDTH_SIGMAS * hi * t.max(0.0).sqrt();
    if t == 0.0 {
        return Ok(MeanCertainty {
            mean_upper: 0.0,
            neg_mean_upper: 0.0,
            var_upper: 0.0,
            var_lower: 0.0,
            cap,
        });
    }
    let clamp = crate::payoff::parse(&format!("clamp(x1, {}, {cap})", -cap), 1)?;
    let sq = crate::payoff::parse(&format!("sqcap(x1, {cap})"), 1)?;
    Ok(MeanCertainty {
        mean_upper: g_normal_expectation(&clamp, theta, t, 0.0, res)?,
        neg_mean_upper: g_normal_expectation(&clamp.scaled(-1.0), theta, t, 0.0, res)?,
        var_upper: g_normal_expectation(&sq, theta, t, 0.0, res)?,
        var_lower: -g_normal_expectation(&sq.scaled(-1.0), theta, t, 0.0, res)?,
        cap,
    })
}

/// Values at probe points under successive halvings of `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub nx: Vec<usize>,
    pub nt: Vec<usize>,
    /// `values[r][k]` at refinement `r`, probe `k`.
    pub values: Vec<Vec<f64>>,
    /// Largest probe change between refinement `r` and `r + 1`.
    pub differences: Vec<f64>,
    pub passes: bool,
}

/// Differences at or below this are treated as converged.
const CONVERGED: f64 = 1e-12;

pub fn convergence_study(
    phi: &PayoffExpr,
    theta: &ThetaSet,
    base: Grid1D,
    refinements: usize,
    probes: &[f64],
    cfl: f64,
) -> Result<ConvergenceTable> {
    let (_, hi) = theta.bounds()?;
    let mut table = ConvergenceTable {
        nx: vec![],
        nt: vec![],
        values: vec![],
        differences: vec![],
        passes: true,
    };
    for r in 0..=refinements {
        let nx = (base.nx - 1) * (1 << r) + 1;
        let grid = Grid1D::with_cfl(base.x_min, base.x_max, nx, base.t_end, hi, cfl)?;
        let sol = solve_gheat(phi, theta, grid, SolveOptions { cfl, snapshot_every: None })?;
        table.nx.push(nx);
        table.nt.push(grid.nt);
        table.values.push(probes.iter().map(|&x| sol.at(x)).collect());
    }
    for r in 1..table.values.len() {
        let d = table.values[r]
            .iter()
            .zip(&table.values[r - 1])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        table.differences.push(d);
    }
    for w in table.differences.windows(2).skip(1) {
        if w[1] > w[0] && w[1] > CONVERGED {
            table.passes = false;
        }
    }
    Ok(table)
}
