use serde::{Deserialize, Serialize};

use super::functionals::{capacity, point_capacities, tail_functional, upper_expectation, Tail};
use super::model::{exm1, exm2, exm3, Event, FiniteModel, RandomVariable};
use crate::error::{input, Result};

/// How closeness between sample points is judged for quasi-continuity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    /// Every function is continuous.
    Discrete,
    /// `|x − y|` on point labels. A pair closer than `delta` whose values
    /// differ by more than `lipschitz·|x − y|` is a discontinuity witness;
    /// X is quasi-continuous when all witnesses can be removed by a set of
    /// capacity below `epsilon`.
    Euclidean { delta: f64, lipschitz: f64, epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiContinuity {
    pub witnesses: usize,
    /// Capacity of the cheapest cover found.
    pub cover_capacity: f64,
    pub exact: bool,
    pub quasi_continuous: bool,
}

const EXACT_COVER_POINTS: usize = 20;

pub fn quasi_continuity(model: &FiniteModel, x: &RandomVariable, metric: Metric) -> Result<QuasiContinuity> {
    x.check(model)?;
    let Metric::Euclidean { delta, lipschitz, epsilon } = metric else {
        return Ok(QuasiContinuity {
            witnesses: 0,
            cover_capacity: 0.0,
            exact: true,
            quasi_continuous: true,
        });
    };
    let pts = model.points();
    let v = x.values();
    let mut pairs = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = (pts[i] - pts[j]).abs();
            if d < delta && (v[i] - v[j]).abs() > lipschitz * d {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return Ok(QuasiContinuity {
            witnesses: 0,
            cover_capacity: 0.0,
            exact: true,
            quasi_continuous: true,
        });
    }
    let mut involved: Vec<usize> = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
    involved.sort_unstable();
    involved.dedup();
    let (cover_capacity, exact) = if involved.len() <= EXACT_COVER_POINTS {
        let mut best = f64::INFINITY;
        for mask in 0u32..(1u32 << involved.len()) {
            let chosen = |i: usize| {
                let k = involved.binary_search(&i).unwrap();
                mask & (1 << k) != 0
            };
            if pairs.iter().all(|(a, b)| chosen(*a) || chosen(*b)) {
                let ev = Event::new(
                    (0..involved.len())
                        .filter(|k| mask & (1 << k) != 0)
                        .map(|k| involved[k])
                        .collect(),
                );
                best = best.min(capacity(model, &ev)?);
            }
        }
        (best, true)
    } else {
        let caps = point_capacities(model);
        let mut cover = Event::empty();
        for (a, b) in &pairs {
            if !cover.contains(*a) && !cover.contains(*b) {
                let pick = if caps[*a] <= caps[*b] { *a } else { *b };
                cover = cover.union(&Event::new(vec![pick]));
            }
        }
        (capacity(model, &cover)?, false)
    };
    Ok(QuasiContinuity {
        witnesses: pairs.len(),
        cover_capacity,
        exact,
        quasi_continuous: cover_capacity < epsilon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub p: f64,
    pub norm_p: f64,
    pub in_lp: bool,
    pub in_lp_b: bool,
    pub in_lp_c: bool,
    pub tail_values: Vec<(f64, f64)>,
}

/// Membership of `X` on a single finite model.
///
/// On one finite model the tail functional vanishes once `n` passes the
/// largest `|X|` on non-polar points, so `in_lp_b` holds; `in_lp_c` then
/// reduces to quasi-continuity under `metric`.
pub fn membership_report(model: &FiniteModel, x: &RandomVariable, p: f64, metric: Metric) -> Result<MembershipReport> {
    if !(p > 0.0) {
        return input(format!("exponent p must be positive, got {p}"));
    }
    x.check(model)?;
    let expect = upper_expectation(model, &x.map(|v| v.abs().powf(p)))?;
    let norm_p = expect.powf(1.0 / p);
    let caps = point_capacities(model);
    let max_abs = x
        .values()
        .iter()
        .zip(&caps)
        .filter(|(_, c)| **c > 0.0)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    let top = max_abs.ceil() as usize + 1;
    let stride = (top / 64).max(1);
    let tail_values = (0..=top)
        .step_by(stride)
        .chain(std::iter::once(top))
        .map(|n| Ok((n as f64, tail_functional(model, x, p, n as f64, Tail::Strict)?)))
        .collect::<Result<Vec<_>>>()?;
    let in_lp = expect.is_finite();
    let in_lp_b = in_lp && tail_values.last().map(|t| t.1 == 0.0).unwrap_or(true);
    let in_lp_c = in_lp_b && quasi_continuity(model, x, metric)?.quasi_continuous;
    Ok(MembershipReport {
        p,
        norm_p,
        in_lp,
        in_lp_b,
        in_lp_c,
        tail_values,
    })
}

/// A family of truncated models indexed by a size parameter `N`, together
/// with the random variable under study.
pub trait ModelFamily {
    fn name(&self) -> String;
    fn build(&self, n: usize) -> (FiniteModel, RandomVariable);
    /// Threshold at which the tail is sampled for size `n`.
    fn threshold(&self, n: usize) -> f64 {
        n as f64 / 2.0
    }
    fn metric(&self) -> Metric {
        Metric::Discrete
    }
}

/// Built-in example families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Example {
    Exm2,
    Exm3,
    /// Indicator of the point nearest ½ on `{0, 1/M, …, 1}`.
    Exm1,
}

/// Metric used for the Exm1 family: witnesses closer than 0.1 with a jump
/// steeper than slope 1, removable only by a set of capacity < ½.
pub const EXM1_METRIC: Metric = Metric::Euclidean {
    delta: 0.1,
    lipschitz: 1.0,
    epsilon: 0.5,
};

impl ModelFamily for Example {
    fn name(&self) -> String {
        format!("{self:?}").to_lowercase()
    }

    fn build(&self, n: usize) -> (FiniteModel, RandomVariable) {
        match self {
            Example::Exm2 => {
                let m = exm2(n);
                let x = m.identity_variable();
                (m, x)
            }
            Example::Exm3 => {
                let m = exm3(n);
                let x = m.identity_variable();
                (m, x)
            }
            Example::Exm1 => {
                let m = exm1(n);
                let mid = n / 2;
                let x = RandomVariable::new((0..=n).map(|k| if k == mid { 1.0 } else { 0.0 }).collect())
                    .expect("finite");
                (m, x)
            }
        }
    }

    fn metric(&self) -> Metric {
        match self {
            Example::Exm1 => EXM1_METRIC,
            _ => Metric::Discrete,
        }
    }
}

pub const DEFAULT_SCHEDULE: [usize; 4] = [8, 16, 32, 64];

/// Extrapolated tail limits at or below this (relative to `max(1, 𝔼|X|^p)`)
/// count as vanishing.
pub const VANISHING_TAIL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRow {
    pub n: usize,
    pub upper_moment: f64,
    pub tail: f64,
    pub tail_limit: f64,
    pub in_lp_b: bool,
    pub quasi_continuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyMembership {
    pub family: String,
    pub p: f64,
    pub rows: Vec<FamilyRow>,
    pub in_lp: bool,
    pub in_lp_b: bool,
    pub in_lp_c: bool,
    /// Verdicts constant over the last three sizes.
    pub stable: bool,
}

/// Aitken Δ² extrapolation of three successive terms. Falls back to the
/// last term unless the differences shrink geometrically with one sign.
pub fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let (d1, d2) = (b - a, c - b);
    let scale = (a.abs() + b.abs() + c.abs()).max(1e-300);
    if d1.abs() <= 1e-15 * scale || d2.abs() <= 1e-15 * scale {
        return c;
    }
    let ratio = d2 / d1;
    if !(0.0..1.0).contains(&ratio) {
        return c;
    }
    let l = c - d2 * d2 / (d2 - d1);
    if l.is_finite() {
        l
    } else {
        c
    }
}

/// `lim_N 𝔼_N[|X|^p]` by Aitken extrapolation over the last three sizes of
/// `schedule`; exact for families whose truncation error is geometric in the
/// doubling of `N`.
pub fn family_upper_expectation(family: &dyn ModelFamily, p: f64, schedule: &[usize]) -> Result<f64> {
    if schedule.len() < 3 {
        return input("schedule needs at least three sizes");
    }
    let vals = schedule[schedule.len() - 3..]
        .iter()
        .map(|&n| {
            let (m, x) = family.build(n);
            upper_expectation(&m, &x.map(|v| v.abs().powf(p)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aitken(vals[0], vals[1], vals[2]))
}

/// Limit verdicts over a size schedule.
///
/// The tail `T(N) = 𝔼[|X|^p 1_{|X| > N/2}]` is evaluated at `N/4, N/2, N`
/// for each scheduled size and its limit estimated by Aitken extrapolation;
/// the size-`N` verdict is "vanishing" when that estimate is below
/// [`VANISHING_TAIL`]. Quasi-continuity is evaluated on the size-`N` model.
pub fn family_membership(family: &dyn ModelFamily, p: f64, schedule: &[usize]) -> Result<FamilyMembership> {
    if !(p > 0.0) {
        return input(format!("exponent p must be positive, got {p}"));
    }
    if schedule.len() < 3 {
        return input("schedule needs at least three sizes");
    }
    let tail_at = |n: usize| -> Result<(f64, f64)> {
        let (m, x) = family.build(n);
        let moment = upper_expectation(&m, &x.map(|v| v.abs().powf(p)))?;
        Ok((moment, tail_functional(&m, &x, p, family.threshold(n), Tail::Strict)?))
    };
    let mut rows = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let (moment, t) = tail_at(n)?;
        let (_, t_half) = tail_at((n / 2).max(1))?;
        let (_, t_quarter) = tail_at((n / 4).max(1))?;
        let limit = if t == 0.0 { 0.0 } else { aitken(t_quarter, t_half, t).max(0.0) };
        let (m, x) = family.build(n);
        rows.push(FamilyRow {
            n,
            upper_moment: moment,
            tail: t,
            tail_limit: limit,
            in_lp_b: limit <= VANISHING_TAIL * moment.max(1.0),
            quasi_continuous: quasi_continuity(&m, &x, family.metric())?.quasi_continuous,
        });
    }
    let last3 = &rows[rows.len() - 3..];
    let stable = last3
        .iter()
        .all(|r| r.in_lp_b == last3[2].in_lp_b && r.quasi_continuous == last3[2].quasi_continuous);
    let last = rows.last().unwrap();
    let in_lp = rows.iter().all(|r| r.upper_moment.is_finite());
    let in_lp_b = in_lp && last.in_lp_b;
    Ok(FamilyMembership {
        family: family.name(),
        p,
        in_lp,
        in_lp_b,
        in_lp_c: in_lp_b && last.quasi_continuous,
        stable,
        rows,
    })
}
