use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::functionals::{capacity, point_capacities, tail_functional, upper_expectation, Tail, CHECK_TOL};
use super::model::{Event, FiniteModel, RandomVariable};
use crate::error::{input, Error, Result};

/// One row of a property report: `lhs` compared against `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// Describes the events involved when the check fails.
    pub witness: Option<String>,
}

impl Check {
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::new(name, lhs, rhs, lhs <= rhs + CHECK_TOL)
    }

    pub fn eq(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::new(name, lhs, rhs, (lhs - rhs).abs() <= tol)
    }

    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            pass,
            witness: None,
        }
    }

    fn witnessed(mut self, w: impl FnOnce() -> String) -> Self {
        if !self.pass {
            self.witness = Some(w());
        }
        self
    }
}

fn describe(model: &FiniteModel, a: &Event) -> String {
    let labels: Vec<String> = a.indices().iter().map(|&i| model.points()[i].to_string()).collect();
    format!("{{{}}}", labels.join(","))
}

/// Choquet capacity properties on the supplied events: range, monotonicity,
/// subadditivity (pairwise and over the whole list), and continuity from
/// below along increasing runs of the list.
pub fn choquet_suite(model: &FiniteModel, events: &[Event]) -> Result<Vec<Check>> {
    let caps = events
        .iter()
        .map(|a| capacity(model, a))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::new();
    for (a, c) in events.iter().zip(&caps) {
        let ok = (-CHECK_TOL..=1.0 + CHECK_TOL).contains(c);
        out.push(Check::new("range", *c, 1.0, ok).witnessed(|| describe(model, a)));
        if a.is_empty() {
            out.push(Check::eq("empty", *c, 0.0, 0.0));
        }
        if a.len() == model.len() {
            out.push(Check::eq("whole", *c, 1.0, CHECK_TOL));
        }
    }
    let mut mono_fail = None;
    let mut sub_fail = None;
    let mut mono_worst = f64::NEG_INFINITY;
    let mut sub_worst = f64::NEG_INFINITY;
    for i in 0..events.len() {
        for j in 0..events.len() {
            if i != j && events[i].is_subset(&events[j]) {
                let d = caps[i] - caps[j];
                if d > mono_worst {
                    mono_worst = d;
                    if d > CHECK_TOL {
                        mono_fail = Some((i, j));
                    }
                }
            }
            if i < j {
                let u = capacity(model, &events[i].union(&events[j]))?;
                let d = u - caps[i] - caps[j];
                if d > sub_worst {
                    sub_worst = d;
                    if d > CHECK_TOL {
                        sub_fail = Some((i, j));
                    }
                }
            }
        }
    }
    if mono_worst > f64::NEG_INFINITY {
        out.push(Check::le("monotone", mono_worst, 0.0).witnessed(|| {
            let (i, j) = mono_fail.unwrap();
            format!("{} ⊆ {}", describe(model, &events[i]), describe(model, &events[j]))
        }));
    }
    if sub_worst > f64::NEG_INFINITY {
        out.push(Check::le("subadditive_pairwise", sub_worst, 0.0).witnessed(|| {
            let (i, j) = sub_fail.unwrap();
            format!("{} ∪ {}", describe(model, &events[i]), describe(model, &events[j]))
        }));
    }
    if !events.is_empty() {
        let all = events.iter().fold(Event::empty(), |acc, a| acc.union(a));
        out.push(Check::le("subadditive_union", capacity(model, &all)?, caps.iter().sum()));
    }
    // Increasing runs in list order.
    let mut start = 0;
    while start < events.len() {
        let mut end = start;
        while end + 1 < events.len() && events[end].is_subset(&events[end + 1]) {
            end += 1;
        }
        if end > start {
            let run = &caps[start..=end];
            let nondecreasing = run.windows(2).all(|w| w[0] <= w[1] + CHECK_TOL);
            let union = events[start..=end].iter().fold(Event::empty(), |acc, a| acc.union(a));
            let cu = capacity(model, &union)?;
            let lim = run.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ok = nondecreasing && (cu - lim).abs() <= CHECK_TOL;
            out.push(
                Check::new(format!("continuity_from_below[{start}..={end}]"), cu, lim, ok)
                    .witnessed(|| format!("chain starting at {}", describe(model, &events[start]))),
            );
        }
        start = end + 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorelCantelliReport {
    pub capacities: Vec<f64>,
    /// Whether the capacity series looks summable over the horizon.
    pub summable: bool,
    /// Last complete dyadic block sum over the previous one.
    pub block_ratio: f64,
    /// `(k, c(∪_{k≤n≤H} A_n), Σ_{k≤n≤H} c(A_n))`
    pub rows: Vec<(usize, f64, f64)>,
    /// Capacity of `∩_{k≤H} ∪_{k≤n≤H} A_n`.
    pub limsup_capacity: f64,
    pub pass: bool,
    pub precondition_violation: Option<String>,
}

/// Block ratio below which the capacity series is treated as summable.
pub const SUMMABLE_BLOCK_RATIO: f64 = 0.75;

/// Borel–Cantelli on `events[n-1] = A_n`, `n = 1..=horizon`.
///
/// Summability is judged by dyadic condensation: the sum over
/// `(2^{j-1}, 2^j]` must shrink by [`SUMMABLE_BLOCK_RATIO`] between the last
/// two complete blocks (harmonic-type series keep a constant block sum).
pub fn borel_cantelli_check(model: &FiniteModel, events: &[Event], horizon: usize) -> Result<BorelCantelliReport> {
    if horizon < 4 || events.len() < horizon {
        return input(format!(
            "need horizon >= 4 and at least `horizon` events, got horizon {horizon} with {} events",
            events.len()
        ));
    }
    let caps = events[..horizon]
        .iter()
        .map(|a| capacity(model, a))
        .collect::<Result<Vec<f64>>>()?;
    let top = usize::BITS - 1 - horizon.leading_zeros();
    let block = |j: u32| -> f64 { caps[(1usize << (j - 1))..(1usize << j)].iter().sum() };
    let (prev, last) = (block(top - 1), block(top));
    let block_ratio = if prev > 0.0 { last / prev } else if last > 0.0 { f64::INFINITY } else { 0.0 };
    let summable = last <= CHECK_TOL || block_ratio <= SUMMABLE_BLOCK_RATIO;

    let mut rows = Vec::with_capacity(horizon);
    let mut union = Event::empty();
    let mut tail = 0.0;
    for k in (1..=horizon).rev() {
        union = union.union(&events[k - 1]);
        tail += caps[k - 1];
        rows.push((k, capacity(model, &union)?, tail));
    }
    rows.reverse();
    let limsup_capacity = rows.last().map(|r| r.1).unwrap_or(0.0);
    if !summable {
        return Ok(BorelCantelliReport {
            capacities: caps,
            summable,
            block_ratio,
            rows,
            limsup_capacity,
            pass: false,
            precondition_violation: Some(format!(
                "capacity series not summable over the horizon (block ratio {block_ratio:.3})"
            )),
        });
    }
    let bounded = rows.iter().all(|(_, c, t)| *c <= 10.0 * t + CHECK_TOL);
    let decays = rows.windows(2).all(|w| w[1].1 <= w[0].1 + CHECK_TOL);
    Ok(BorelCantelliReport {
        capacities: caps,
        summable,
        block_ratio,
        rows,
        limsup_capacity,
        pass: bounded && decays,
        precondition_violation: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformIntegrability {
    pub threshold: f64,
    pub delta: f64,
    /// Largest `𝔼[|X| 1_A]` over checked events with `c(A) ≤ δ`.
    pub worst: f64,
    pub events_checked: usize,
    pub exhaustive: bool,
    pub holds: bool,
}

/// Exhaustive enumeration up to this many positive-capacity points.
const EXHAUSTIVE_POINTS: usize = 20;
const RANDOM_EVENTS: usize = 10_000;
const UI_SEED: u64 = 0x7569;

/// Constructive `δ = ε/(2N)` with `N` the smallest integer threshold whose
/// tail is at most `ε/2`, verified over events of capacity at most `δ`.
pub fn uniform_integrability_check(model: &FiniteModel, x: &RandomVariable, epsilon: f64) -> Result<UniformIntegrability> {
    if !(epsilon > 0.0) {
        return input(format!("epsilon must be positive, got {epsilon}"));
    }
    x.check(model)?;
    let caps = point_capacities(model);
    let max_abs = x
        .values()
        .iter()
        .zip(&caps)
        .filter(|(_, c)| **c > 0.0)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    if tail_functional(model, x, 1.0, max_abs, Tail::Strict)? > 0.0 {
        return Err(Error::Precondition("X is not in L¹_b".into()));
    }
    let mut threshold = 1.0;
    while tail_functional(model, x, 1.0, threshold, Tail::Strict)? > epsilon / 2.0 {
        threshold += 1.0;
    }
    let delta = epsilon / (2.0 * threshold);
    let absx = x.map(f64::abs);
    let support: Vec<usize> = (0..model.len()).filter(|i| caps[*i] > 0.0).collect();

    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let exhaustive = support.len() <= EXHAUSTIVE_POINTS;
    let measures = model.measures();
    if exhaustive {
        // Gray-code walk keeps P(A) and E_P[|X|1_A] per measure incrementally.
        let mut mass = vec![0.0; measures.len()];
        let mut weight = vec![0.0; measures.len()];
        let mut member = vec![false; support.len()];
        for step in 1u64..(1u64 << support.len()) {
            let bit = step.trailing_zeros() as usize;
            let i = support[bit];
            let sign = if member[bit] { -1.0 } else { 1.0 };
            member[bit] = !member[bit];
            for (k, p) in measures.iter().enumerate() {
                mass[k] += sign * p[i];
                weight[k] += sign * p[i] * absx.values()[i];
            }
            let c = mass.iter().copied().fold(0.0, f64::max);
            if c <= delta + CHECK_TOL {
                checked += 1;
                worst = worst.max(weight.iter().copied().fold(0.0, f64::max));
            }
        }
    } else {
        let mut consider = |a: &Event| -> Result<()> {
            if capacity(model, a)? <= delta + CHECK_TOL {
                checked += 1;
                worst = worst.max(upper_expectation(model, &indicator_times(&absx, a))?);
            }
            Ok(())
        };
        for p in measures {
            let mut order: Vec<usize> = support.iter().copied().filter(|i| p[*i] > 0.0).collect();
            order.sort_by(|a, b| absx.values()[*b].total_cmp(&absx.values()[*a]));
            let mut a = Event::empty();
            for i in order {
                let trial = a.union(&Event::new(vec![i]));
                if capacity(model, &trial)? <= delta + CHECK_TOL {
                    a = trial;
                }
            }
            consider(&a)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(UI_SEED);
        for _ in 0..RANDOM_EVENTS {
            let size = rng.random_range(1..=4.min(support.len()));
            let idx = (0..size).map(|_| support[rng.random_range(0..support.len())]).collect();
            consider(&Event::new(idx))?;
        }
    }
    Ok(UniformIntegrability {
        threshold,
        delta,
        worst,
        events_checked: checked,
        exhaustive,
        holds: worst <= epsilon + CHECK_TOL,
    })
}

fn indicator_times(x: &RandomVariable, a: &Event) -> RandomVariable {
    RandomVariable::new(
        (0..x.len())
            .map(|i| if a.contains(i) { x.values()[i] } else { 0.0 })
            .collect(),
    )
    .expect("finite")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneConvergence {
    pub values: Vec<f64>,
    pub limit_value: f64,
    pub nonincreasing: bool,
    /// `𝔼[X_last] − 𝔼[X]` against `max (X_last − X)` over non-polar points.
    pub final_gap: f64,
    pub gap_bound: f64,
    pub converges: bool,
}

/// For `X_n ↓ X` quasi-surely, checks `𝔼[X_n] ↓ 𝔼[X]`; `limit` defaults to
/// the last element of the sequence.
pub fn monotone_convergence_check(
    model: &FiniteModel,
    seq: &[RandomVariable],
    limit: Option<&RandomVariable>,
) -> Result<MonotoneConvergence> {
    let Some(last) = seq.last() else {
        return input("empty sequence");
    };
    let limit = limit.unwrap_or(last);
    limit.check(model)?;
    for x in seq {
        x.check(model)?;
    }
    let caps = point_capacities(model);
    let polar = |i: usize| caps[i] == 0.0;
    for (n, w) in seq.windows(2).enumerate() {
        for i in 0..model.len() {
            if !polar(i) && w[1].values()[i] > w[0].values()[i] + CHECK_TOL {
                return Err(Error::Precondition(format!(
                    "sequence increases between index {n} and {} at point {}",
                    n + 1,
                    model.points()[i]
                )));
            }
        }
    }
    for i in 0..model.len() {
        if !polar(i) && limit.values()[i] > last.values()[i] + CHECK_TOL {
            return Err(Error::Precondition(format!(
                "limit exceeds the last element at point {}",
                model.points()[i]
            )));
        }
    }
    let values = seq
        .iter()
        .map(|x| upper_expectation(model, x))
        .collect::<Result<Vec<f64>>>()?;
    let limit_value = upper_expectation(model, limit)?;
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0] + CHECK_TOL);
    let final_gap = values[values.len() - 1] - limit_value;
    let gap_bound = (0..model.len())
        .filter(|i| !polar(*i))
        .map(|i| last.values()[i] - limit.values()[i])
        .fold(0.0, f64::max);
    let above = values.iter().all(|v| *v >= limit_value - 1e-9);
    Ok(MonotoneConvergence {
        converges: above && final_gap <= gap_bound + 1e-9,
        values,
        limit_value,
        nonincreasing,
        final_gap,
        gap_bound,
    })
}
