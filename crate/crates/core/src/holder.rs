//! Dyadic Hölder statistics of sampled paths on `[0, 1]`.
//!
//! `M(α) = sup_{s≠t dyadic} |X_t − X_s| / |t − s|^α`. Because the grid is
//! uniform, `M(α) = max_j D_j / (j h)^α` with `D_j` the largest increment at
//! lag `j`; the lag maxima are computed once per path and level and reused
//! for every `α`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input, Result};
use crate::sum::pairwise_sum;

/// Largest level for exact pair enumeration (≈ 8.4M pairs).
pub const EXACT_MAX_LEVEL: u32 = 12;
/// Relative growth per level of the mean `M^p` below which a row is "stable".
pub const STABLE_GROWTH: f64 = 0.10;

/// Values on the dyadic grid `k / 2^L`, `k = 0..=2^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    level: u32,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(level: u32, values: Vec<f64>) -> Result<Self> {
        if level < 2 {
            return input(format!("dyadic level must be at least 2, got {level}"));
        }
        if values.len() != (1usize << level) + 1 {
            return input(format!(
                "level {level} needs {} values, got {}",
                (1usize << level) + 1,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return input("path values must be finite");
        }
        Ok(Self { level, values })
    }

    pub fn from_fn(level: u32, f: impl Fn(f64) -> f64) -> Self {
        let n = 1usize << level;
        let values = (0..=n).map(|k| f(k as f64 / n as f64)).collect();
        Self::new(level.max(2), values).expect("valid sampled path")
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The same path on the grid of level `level ≤ self.level`.
    pub fn coarsen(&self, level: u32) -> Result<SampledPath> {
        if level > self.level || level < 2 {
            return input(format!("cannot coarsen level {} to {level}", self.level));
        }
        let stride = 1usize << (self.level - level);
        Ok(SampledPath {
            level,
            values: self.values.iter().step_by(stride).copied().collect(),
        })
    }

    /// `D_j = max_i |X_{i+j} − X_i|` for `j = 1..=2^L` (index `j − 1`).
    pub fn lag_maxima(&self) -> Vec<f64> {
        let v = &self.values;
        let n = v.len() - 1;
        (1..=n).map(|j| max_abs_diff(&v[j..], &v[..=n - j])).collect()
    }

    /// Largest increment between adjacent points at each level `0..=L`.
    fn adjacent_maxima(&self) -> Vec<f64> {
        (0..=self.level)
            .map(|l| {
                let stride = 1usize << (self.level - l);
                let v = &self.values;
                let n = v.len() - 1;
                (0..n)
                    .step_by(stride)
                    .map(|i| (v[i + stride] - v[i]).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// `max_i |a_i − b_i|`, in independent lanes so it vectorises.
fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            let d = (x[k] - y[k]).abs();
            acc[k] = if d > acc[k] { d } else { acc[k] };
        }
    }
    let mut m = acc.iter().copied().fold(0.0, f64::max);
    for (x, y) in ra.iter().zip(rb) {
        m = m.max((x - y).abs());
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HolderMode {
    Exact,
    /// `M ≤ 2/(1 − 2^{−α}) · max_l K_l 2^{lα}`, `K_l` the largest adjacent
    /// increment at level `l`.
    ChainingBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderStatistic {
    pub alpha: f64,
    pub m: f64,
    pub level: u32,
    pub mode: HolderMode,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return input(format!("alpha must lie in [0, 1), got {alpha}"));
    }
    Ok(())
}

/// `M(α)` from precomputed lag maxima at the given level.
pub fn holder_from_lags(lags: &[f64], level: u32, alpha: f64) -> f64 {
    let h = 1.0 / (1usize << level) as f64;
    lags.iter()
        .enumerate()
        .map(|(k, d)| d / ((k + 1) as f64 * h).powf(alpha))
        .fold(0.0, f64::max)
}

pub fn holder_statistic(path: &SampledPath, alpha: f64) -> Result<HolderStatistic> {
    check_alpha(alpha)?;
    if path.level <= EXACT_MAX_LEVEL || alpha == 0.0 {
        let m = if alpha == 0.0 {
            let hi = path.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = path.values.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        } else {
            holder_from_lags(&path.lag_maxima(), path.level, alpha)
        };
        return Ok(HolderStatistic {
            alpha,
            m,
            level: path.level,
            mode: HolderMode::Exact,
        });
    }
    let k = path.adjacent_maxima();
    let sup = k
        .iter()
        .enumerate()
        .map(|(l, kl)| kl * 2f64.powf(l as f64 * alpha))
        .fold(0.0, f64::max);
    Ok(HolderStatistic {
        alpha,
        m: 2.0 / (1.0 - 2f64.powf(-alpha)) * sup,
        level: path.level,
        mode: HolderMode::ChainingBound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Stable,
    Diverging,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KolmogorovRow {
    pub alpha: f64,
    pub level: u32,
    pub mean_mp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KolmogorovVerdict {
    pub alpha: f64,
    /// Whether `α < ε/p`, the window in which finiteness is guaranteed.
    pub inside_window: bool,
    /// Relative growth of the mean `M^p` per level.
    pub growth: Vec<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KolmogorovReport {
    pub p: f64,
    pub epsilon: f64,
    pub rows: Vec<KolmogorovRow>,
    pub verdicts: Vec<KolmogorovVerdict>,
    /// The stable/diverging split is a finite-data heuristic.
    pub heuristic: &'static str,
}

/// Empirical mean of `M(α)^p` at levels `L−2, L−1, L`; "stable" when it
/// grows by less than [`STABLE_GROWTH`] per level.
pub fn kolmogorov_report(paths: &[SampledPath], p: f64, epsilon: f64, alphas: &[f64]) -> Result<KolmogorovReport> {
    let Some(first) = paths.first() else {
        return input("no paths");
    };
    let level = first.level;
    if paths.iter().any(|q| q.level != level) {
        return input("paths must share a dyadic level");
    }
    if level < 4 {
        return input("kolmogorov report needs level >= 4");
    }
    for &a in alphas {
        check_alpha(a)?;
        if a <= 0.0 {
            return input("alphas must be positive");
        }
    }
    let levels = [level - 2, level - 1, level];
    // per_path[i][l][a] = M(α_a)^p for path i at levels[l]
    let per_path: Vec<Vec<Vec<f64>>> = paths
        .par_iter()
        .map(|path| {
            levels
                .iter()
                .map(|&l| {
                    let q = path.coarsen(l).expect("level within range");
                    let lags = q.lag_maxima();
                    alphas.iter().map(|&a| holder_from_lags(&lags, l, a).powf(p)).collect()
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        let means: Vec<f64> = (0..levels.len())
            .map(|li| {
                let xs: Vec<f64> = per_path.iter().map(|pp| pp[li][ai]).collect();
                pairwise_sum(&xs) / xs.len() as f64
            })
            .collect();
        for (li, m) in means.iter().enumerate() {
            rows.push(KolmogorovRow {
                alpha,
                level: levels[li],
                mean_mp: *m,
            });
        }
        let growth: Vec<f64> = means.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        let verdict = if growth.iter().all(|g| *g < STABLE_GROWTH) {
            Verdict::Stable
        } else {
            Verdict::Diverging
        };
        verdicts.push(KolmogorovVerdict {
            alpha,
            inside_window: alpha < epsilon / p,
            growth,
            verdict,
        });
    }
    Ok(KolmogorovReport {
        p,
        epsilon,
        rows,
        verdicts,
        heuristic: "stable = mean M^p grows < 10% per dyadic level (finite-data proxy)",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentFit {
    pub c_hat: f64,
    pub exponent_hat: f64,
    pub lags: usize,
}

/// Fits `sup_groups mean |X_{t+τ} − X_t|^p ≈ c τ^e` over dyadic lags
/// `τ = 2^k h`, `k = 0..=L−2`, by least squares in log-log scale.
///
/// Each group is an ensemble of paths (for instance one per policy); the
/// upper moment is the largest group mean.
pub fn moment_exponent_fit(groups: &[Vec<SampledPath>], p: f64) -> Result<MomentFit> {
    let level = groups
        .iter()
        .flatten()
        .map(|q| q.level)
        .next()
        .ok_or_else(|| crate::Error::Input("no paths".into()))?;
    if groups.iter().flatten().any(|q| q.level != level) {
        return input("paths must share a dyadic level");
    }
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    let lag_count = (level - 1) as usize;
    if lag_count < 3 {
        return input(format!("moment fit needs at least 3 lags, level {level} gives {lag_count}"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..lag_count {
        let j = 1usize << k;
        let upper = groups
            .iter()
            .filter(|g| !g.is_empty())
            .map(|g| {
                let per: Vec<f64> = g
                    .iter()
                    .map(|q| {
                        let v = &q.values;
                        let terms: Vec<f64> = (0..=n - j).map(|i| (v[i + j] - v[i]).abs().powf(p)).collect();
                        pairwise_sum(&terms) / terms.len() as f64
                    })
                    .collect();
                pairwise_sum(&per) / per.len() as f64
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if upper > 0.0 {
            xs.push((j as f64 * h).ln());
            ys.push(upper.ln());
        }
    }
    if xs.len() < 3 {
        return input("fewer than 3 lags with nonzero moments");
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(MomentFit {
        c_hat: (my - slope * mx).exp(),
        exponent_hat: slope,
        lags: xs.len(),
    })
}
