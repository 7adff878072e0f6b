//! The generator `G(A) = ½ sup_{γ∈Θ} tr(γγᵀA)` for interval and finite
//! matrix-list uncertainty sets.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

const SYM_TOL: f64 = 1e-12;

/// The volatility uncertainty set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThetaSet {
    /// `[min, max]` for a scalar volatility.
    Interval { min: f64, max: f64 },
    /// A finite list of `d×d` matrices, row-major.
    Matrices { data: Vec<Vec<Vec<f64>>> },
}

impl ThetaSet {
    pub fn interval(min: f64, max: f64) -> Result<Self> {
        let t = ThetaSet::Interval { min, max };
        t.validate()?;
        Ok(t)
    }

    pub fn matrices(data: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let t = ThetaSet::Matrices { data };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ThetaSet::Interval { min, max } => {
                if !(min.is_finite() && max.is_finite()) {
                    return input("interval bounds must be finite");
                }
                if *min < 0.0 || *max <= 0.0 || min > max {
                    return input(format!(
                        "interval needs 0 <= min <= max and max > 0, got [{min}, {max}]"
                    ));
                }
                Ok(())
            }
            ThetaSet::Matrices { data } => {
                let Some(first) = data.first() else {
                    return input("matrix list is empty");
                };
                let d = first.len();
                if d == 0 {
                    return input("matrices must be at least 1x1");
                }
                for (k, m) in data.iter().enumerate() {
                    if m.len() != d || m.iter().any(|row| row.len() != d) {
                        return input(format!("matrix {k} is not {d}x{d}"));
                    }
                    if m.iter().flatten().any(|v| !v.is_finite()) {
                        return input(format!("matrix {k} has a non-finite entry"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ThetaSet::Interval { .. } => 1,
            ThetaSet::Matrices { data } => data[0].len(),
        }
    }

    /// `(σ_min, σ_max)` for an interval.
    pub fn bounds(&self) -> Result<(f64, f64)> {
        match self {
            ThetaSet::Interval { min, max } => Ok((*min, *max)),
            ThetaSet::Matrices { .. } => input("operation requires a 1-D interval uncertainty set"),
        }
    }

    /// Scalar generator for a 1-D interval: `½(σ_max² a⁺ − σ_min² a⁻)`.
    #[inline]
    pub fn g_scalar(sigma_min: f64, sigma_max: f64, a: f64) -> f64 {
        if a >= 0.0 {
            0.5 * sigma_max * sigma_max * a
        } else {
            0.5 * sigma_min * sigma_min * a
        }
    }

    /// Evaluates `G(A)`.
    pub fn g_value(&self, a: &SymMatrix) -> Result<f64> {
        if a.dim() != self.dim() {
            return input(format!(
                "matrix dimension {} does not match uncertainty set dimension {}",
                a.dim(),
                self.dim()
            ));
        }
        match self {
            ThetaSet::Interval { min, max } => Ok(Self::g_scalar(*min, *max, a.get(0, 0))),
            ThetaSet::Matrices { data } => {
                let d = a.dim();
                let mut best = f64::NEG_INFINITY;
                for g in data {
                    // tr(γγᵀA) = Σ_ij (γγᵀ)_ij A_ji
                    let mut tr = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            let ggt: f64 = (0..d).map(|k| g[i][k] * g[j][k]).sum();
                            tr += ggt * a.get(j, i);
                        }
                    }
                    best = best.max(0.5 * tr);
                }
                Ok(best)
            }
        }
    }

    /// Whether `G(A) − G(B) ≥ β tr(A − B)` holds with some `β > 0`, and the
    /// constant computed from the listed elements.
    pub fn degeneracy_report(&self) -> (bool, f64) {
        let beta = match self {
            ThetaSet::Interval { min, .. } => 0.5 * min * min,
            ThetaSet::Matrices { data } => data
                .iter()
                .map(|g| {
                    let d = g.len();
                    let gm = DMatrix::from_fn(d, d, |i, j| g[i][j]);
                    let ggt = &gm * gm.transpose();
                    let ev = ggt.symmetric_eigen().eigenvalues;
                    0.5 * ev.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
                })
                .fold(f64::INFINITY, f64::min),
        };
        (beta > 0.0, beta)
    }
}

/// A real symmetric `d×d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return input("symmetric matrix must be square and nonempty");
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if entries.iter().any(|v| !v.is_finite()) {
            return input("symmetric matrix has a non-finite entry");
        }
        for i in 0..d {
            for j in 0..i {
                if (entries[i * d + j] - entries[j * d + i]).abs() > SYM_TOL {
                    return input(format!("matrix is not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self { d, entries })
    }

    pub fn scalar(a: f64) -> Self {
        Self { d: 1, entries: vec![a] }
    }

    pub fn identity(d: usize) -> Self {
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            entries[i * d + i] = 1.0;
        }
        Self { d, entries }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            d: self.d,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            d: self.d,
            entries: self.entries.iter().map(|a| a * c).collect(),
        }
    }
}
