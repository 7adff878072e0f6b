use serde::Serialize;

use super::model::{Event, FiniteModel, RandomVariable};
use crate::error::{input, Result};

/// Absolute slack for inequality checks on finite models.
pub const CHECK_TOL: f64 = 1e-12;

/// Indicator convention for tail events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Tail {
    /// `{|X| > n}`
    #[default]
    Strict,
    /// `{|X| ≥ n}`
    Inclusive,
}

impl Tail {
    #[inline]
    fn hit(self, v: f64, n: f64) -> bool {
        match self {
            Tail::Strict => v > n,
            Tail::Inclusive => v >= n,
        }
    }
}

fn dot(p: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in p.iter().zip(x) {
        s += a * b;
    }
    s
}

/// `sup_P E_P[X]` and the lowest-index maximising measure.
pub fn upper_expectation_witness(model: &FiniteModel, x: &RandomVariable) -> Result<(f64, usize)> {
    x.check(model)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, p) in model.measures().iter().enumerate() {
        let v = dot(p, x.values());
        if v > best.0 {
            best = (v, k);
        }
    }
    Ok(best)
}

/// `𝔼[X] = sup_P E_P[X]`.
pub fn upper_expectation(model: &FiniteModel, x: &RandomVariable) -> Result<f64> {
    upper_expectation_witness(model, x).map(|w| w.0)
}

/// `c(A) = sup_P P(A)`.
pub fn capacity(model: &FiniteModel, a: &Event) -> Result<f64> {
    model.check_event(a)?;
    Ok(model
        .measures()
        .iter()
        .map(|p| a.indices().iter().map(|&i| p[i]).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Capacity of each singleton.
pub fn point_capacities(model: &FiniteModel) -> Vec<f64> {
    (0..model.len())
        .map(|i| model.measures().iter().map(|p| p[i]).fold(0.0, f64::max))
        .collect()
}

/// `sup_P E_P[|X|^p 1_{|X| > n}]` (or `≥ n` with [`Tail::Inclusive`]).
pub fn tail_functional(model: &FiniteModel, x: &RandomVariable, p: f64, n: f64, tail: Tail) -> Result<f64> {
    if !(p > 0.0) {
        return input(format!("exponent p must be positive, got {p}"));
    }
    if !(n >= 0.0) {
        return input(format!("threshold must be nonnegative, got {n}"));
    }
    let y = x.map(|v| if tail.hit(v.abs(), n) { v.abs().powf(p) } else { 0.0 });
    upper_expectation(model, &y)
}

/// `n · c({|X| ≥ n})`.
pub fn scaled_capacity_decay(model: &FiniteModel, x: &RandomVariable, n: f64) -> Result<f64> {
    x.check(model)?;
    let a = model.event_where(|i| x.values()[i].abs() >= n);
    Ok(n * capacity(model, &a)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `c({|X| > α}) ≤ 𝔼[|X|^p] / α^p`.
pub fn markov_bound_check(model: &FiniteModel, x: &RandomVariable, p: f64, alpha: f64) -> Result<MarkovCheck> {
    if !(alpha > 0.0) || !(p > 0.0) {
        return input("Markov check needs alpha > 0 and p > 0");
    }
    x.check(model)?;
    let lhs = capacity(model, &model.event_where(|i| x.values()[i].abs() > alpha))?;
    let rhs = upper_expectation(model, &x.map(|v| v.abs().powf(p)))? / alpha.powf(p);
    Ok(MarkovCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + CHECK_TOL,
    })
}
