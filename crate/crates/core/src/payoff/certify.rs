use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ast::PayoffExpr;

/// Numerical bound and Lipschitz estimates over a box.
///
/// `structural_lipschitz` is a guaranteed upper bound derived from the tree;
/// the sampled values are lower estimates.
#[derive(Debug, Clone, Serialize)]
pub struct PayoffCertificate {
    pub bound_estimate: f64,
    pub lipschitz_estimate: f64,
    pub structural_lipschitz: f64,
    pub domain: Vec<(f64, f64)>,
    pub samples: usize,
}

const CERTIFY_SEED: u64 = 0x6365_7274;

/// Estimates `max |φ|` and the Lipschitz constant of `expr` on `domain`.
///
/// Uses a tensor grid of roughly `samples` points, the same number of uniform
/// random points, and a close partner for every random point.
pub fn certify(expr: &PayoffExpr, domain: &[(f64, f64)], samples: usize) -> PayoffCertificate {
    let n = expr.arity();
    let mut bx: Vec<(f64, f64)> = domain.to_vec();
    bx.resize(n, domain.last().copied().unwrap_or((-1.0, 1.0)));
    let samples = samples.max(16);
    let per_axis = ((samples as f64).powf(1.0 / n as f64).floor() as usize).max(2);

    let mut bound = 0.0f64;
    let mut lip = 0.0f64;
    let mut point = vec![0.0; n];
    let mut other = vec![0.0; n];

    let quotient = |a: &[f64], fa: f64, b: &[f64], fb: f64| -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        if d > 0.0 {
            (fa - fb).abs() / d
        } else {
            0.0
        }
    };

    // Tensor grid, with neighbour quotients along each axis.
    let total = per_axis.pow(n as u32);
    for flat in 0..total {
        let mut rem = flat;
        for (k, (lo, hi)) in bx.iter().enumerate() {
            let idx = rem % per_axis;
            rem /= per_axis;
            point[k] = lo + (hi - lo) * idx as f64 / (per_axis - 1) as f64;
        }
        let f = expr.eval_unchecked(&point);
        bound = bound.max(f.abs());
        for (k, (lo, hi)) in bx.iter().enumerate() {
            let step = (hi - lo) / (per_axis - 1) as f64;
            if point[k] + step <= *hi + 1e-12 {
                other.copy_from_slice(&point);
                other[k] += step;
                let g = expr.eval_unchecked(&other);
                lip = lip.max(quotient(&point, f, &other, g));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(CERTIFY_SEED);
    for _ in 0..samples {
        for (k, (lo, hi)) in bx.iter().enumerate() {
            point[k] = rng.random_range(*lo..=*hi);
        }
        let f = expr.eval_unchecked(&point);
        bound = bound.max(f.abs());
        for (k, (lo, hi)) in bx.iter().enumerate() {
            let h = 1e-4 * (hi - lo);
            other[k] = (point[k] + rng.random_range(-h..=h)).clamp(*lo, *hi);
        }
        let g = expr.eval_unchecked(&other);
        lip = lip.max(quotient(&point, f, &other, g));
    }

    PayoffCertificate {
        bound_estimate: bound,
        lipschitz_estimate: lip,
        structural_lipschitz: expr.structural_lipschitz(),
        domain: bx,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::parse;
    use proptest::prelude::*;

    #[test]
    fn clamp_certificate() {
        let e = parse("clamp(x1, -1, 1)", 1).unwrap();
        let c = certify(&e, &[(-10.0, 10.0)], 4001);
        assert_eq!(c.bound_estimate, 1.0);
        assert_eq!(c.structural_lipschitz, 1.0);
        assert!((c.lipschitz_estimate - 1.0).abs() < 1e-9, "{}", c.lipschitz_estimate);
    }

    #[test]
    fn constant_certificate() {
        let e = parse("3", 1).unwrap();
        let c = certify(&e, &[(-10.0, 10.0)], 1000);
        assert_eq!(c.bound_estimate, 3.0);
        assert_eq!(c.lipschitz_estimate, 0.0);
        assert_eq!(c.structural_lipschitz, 0.0);
    }

    #[test]
    fn sqcap_structural_constant() {
        let e = parse("sqcap(x1, 5)", 1).unwrap();
        let c = certify(&e, &[(-10.0, 10.0)], 4001);
        assert_eq!(c.structural_lipschitz, 10.0);
        assert_eq!(c.bound_estimate, 25.0);
        // Steepest slope 2|x| just below the cap at |x| = 5.
        assert!(c.lipschitz_estimate > 9.9 && c.lipschitz_estimate <= 10.0 + 1e-9);
    }

    proptest! {
        #[test]
        fn structural_dominates_sampled(
            a in -5i32..5, b in -5i32..5, k in 1u32..6, lo in -8i32..0,
        ) {
            let src = format!(
                "max(min({a} * x1 + {b} * x2, sqcap(x2 - x1, {k})), clamp(x1, {lo}, abs(x2)))"
            );
            let e = parse(&src, 2).unwrap();
            let c = certify(&e, &[(-6.0, 6.0), (-6.0, 6.0)], 400);
            prop_assert!(c.structural_lipschitz + 1e-9 >= c.lipschitz_estimate,
                "{} < {}", c.structural_lipschitz, c.lipschitz_estimate);
        }
    }
}
