//! Independent reference computations used only by the tests.
//!
//! None of these go through the crate's solvers: Gaussian expectations are
//! computed by Gauss–Hermite quadrature, and the controlled expectation by a
//! semi-Lagrangian dynamic programme over piecewise-constant volatilities.
#![allow(dead_code)]

use nalgebra::DMatrix;
use gexpect::gheat::{Grid1D, Stepper};
use gexpect::payoff::parse;
use gexpect::PayoffExpr;
use rand::Rng;

/// Gauss–Hermite nodes and weights for the standard normal density
/// (Golub–Welsch on the probabilists' Hermite recurrence).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(n, n, |r, c| {
        if r + 1 == c || c + 1 == r {
            (r.max(c) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1 / total).collect(),
    )
}

/// `E[f(σ Z)]` for standard normal `Z`, by composite Simpson on
/// `[-12, 12]` with enough panels that kinked payoffs converge.
pub fn normal_expectation(f: impl Fn(f64) -> f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return f(0.0);
    }
    let n = 200_000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / n as f64;
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = 0.0;
    for k in 0..=n {
        let z = a + k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * f(sigma * z) * pdf(z);
    }
    s * h / 3.0
}

/// `E[min(σ²Z², K²)]`
pub fn capped_square(sigma: f64, cap: f64) -> f64 {
    normal_expectation(|y| (y * y).min(cap * cap), sigma)
}

fn interp(xs: &[f64], v: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return v[0];
    }
    if x >= xs[n - 1] {
        return v[n - 1];
    }
    let h = xs[1] - xs[0];
    let s = (x - xs[0]) / h;
    let i = (s.floor() as usize).min(n - 2);
    let w = s - i as f64;
    (1.0 - w) * v[i] + w * v[i + 1]
}

/// Controlled expectation `sup_σ E[f(x + ∫σ dW)]` at `x = 0`, maximising
/// over volatilities that are constant on each of `steps` sub-intervals.
pub fn controlled_lattice(
    f: impl Fn(f64) -> f64,
    sigma_min: f64,
    sigma_max: f64,
    t: f64,
    steps: usize,
    width: f64,
    nx: usize,
) -> f64 {
    let (z, w) = gauss_hermite(40);
    let xs: Vec<f64> = (0..nx)
        .map(|i| -width + 2.0 * width * i as f64 / (nx - 1) as f64)
        .collect();
    let mut v: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let tau = t / steps as f64;
    for _ in 0..steps {
        let next: Vec<f64> = xs
            .iter()
            .map(|&x| {
                [sigma_min, sigma_max]
                    .iter()
                    .map(|s| {
                        z.iter()
                            .zip(&w)
                            .map(|(zi, wi)| wi * interp(&xs, &v, x + s * tau.sqrt() * zi))
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        v = next;
    }
    interp(&xs, &v, 0.0)
}

/// A bounded Lipschitz payoff in `x1..x{arity}` drawn from the expression
/// language, wrapped in a clamp so it is bounded.
pub fn random_payoff(rng: &mut impl Rng, arity: usize) -> String {
    fn lit(rng: &mut impl Rng) -> String {
        format!("{:.2}", rng.random_range(-3.0..3.0))
    }
    fn node(rng: &mut impl Rng, depth: u32, arity: usize) -> String {
        if depth == 0 || rng.random_bool(0.25) {
            return if rng.random_bool(0.8) {
                format!("x{}", rng.random_range(1..=arity))
            } else {
                lit(rng)
            };
        }
        let d = depth - 1;
        match rng.random_range(0..9) {
            0 => format!("min({}, {})", node(rng, d, arity), node(rng, d, arity)),
            1 => format!("max({}, {})", node(rng, d, arity), node(rng, d, arity)),
            2 => format!("abs({})", node(rng, d, arity)),
            3 => {
                let lo = rng.random_range(-4.0..0.0f64);
                let hi = rng.random_range(0.0..4.0f64);
                format!("clamp({}, {lo:.2}, {hi:.2})", node(rng, d, arity))
            }
            4 => format!("sqcap({}, {:.2})", node(rng, d, arity), rng.random_range(0.5..4.0)),
            5 => format!("{:.2} * ({})", rng.random_range(-2.0..2.0), node(rng, d, arity)),
            6 => format!("({}) + ({})", node(rng, d, arity), node(rng, d, arity)),
            7 => format!("({}) - ({})", node(rng, d, arity), node(rng, d, arity)),
            _ => format!("-({})", node(rng, d, arity)),
        }
    }
    format!("clamp({}, -20, 20)", node(rng, 4, arity))
}

/// Steps `φ`, `max(φ, other)`, `φ + shift` and `−φ` together on a fixed grid
/// with `Θ = [1, 2]`, checking comparison, the maximum principle,
/// translation and `𝔼[φ] + 𝔼[−φ] ≥ 0` after every step.
pub fn check_scheme_properties(src: &str, other: &str, shift: f64) -> Result<(), String> {
    let phi = parse(src, 1).map_err(|e| e.to_string())?;
    let psi = parse(&format!("max({src}, {other})"), 1).map_err(|e| e.to_string())?;
    let grid = Grid1D::centred(0.0, 22.0, 201, 1.0, 2.0, 0.9).map_err(|e| e.to_string())?;
    let nodes = grid.nodes();
    let init = |e: &PayoffExpr, c: f64, s: f64| -> Vec<f64> { nodes.iter().map(|x| s * e.eval_unchecked(&[*x]) + c).collect() };
    let base = init(&phi, 0.0, 1.0);
    let lo = base.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mk = |v: Vec<f64>| Stepper::new(v, 1.0, 2.0, grid, 0.9).map_err(|e| e.to_string());
    let mut u = mk(base)?;
    let mut upper = mk(init(&psi, 0.0, 1.0))?;
    let mut shifted = mk(init(&phi, shift, 1.0))?;
    let mut neg = mk(init(&phi, 0.0, -1.0))?;
    let tol = 1e-9 * (1.0 + hi.abs().max(lo.abs()) + shift.abs());
    while !u.done() {
        for s in [&mut u, &mut upper, &mut shifted, &mut neg] {
            s.step().map_err(|e| e.to_string())?;
        }
        let k = u.steps_taken();
        for i in 0..grid.nx {
            let v = u.values()[i];
            if v > upper.values()[i] + tol {
                return Err(format!("{src}: comparison fails at step {k}, node {i}"));
            }
            if v < lo - tol || v > hi + tol {
                return Err(format!("{src}: maximum principle fails at step {k}, node {i}"));
            }
            if (shifted.values()[i] - v - shift).abs() > tol {
                return Err(format!("{src}: translation fails at step {k}, node {i}"));
            }
            if v + neg.values()[i] < -tol {
                return Err(format!("{src}: sublinearity fails at step {k}, node {i}"));
            }
        }
    }
    Ok(())
}
