use std::fmt;

use crate::error::{input, Result};

/// Expression tree. Variables are zero-based internally and print as `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    /// `literal * expr`
    Scale(f64, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
    Abs(Box<Expr>),
    Clamp(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `min(e², K²)` with `K ≥ 0`.
    Sqcap(Box<Expr>, f64),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Lit(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Scale(c, e) => c * e.eval(x),
            Expr::Min(es) => es.iter().map(|e| e.eval(x)).fold(f64::INFINITY, f64::min),
            Expr::Max(es) => es
                .iter()
                .map(|e| e.eval(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Expr::Abs(e) => e.eval(x).abs(),
            Expr::Clamp(e, lo, hi) => e.eval(x).max(lo.eval(x)).min(hi.eval(x)),
            Expr::Sqcap(e, k) => {
                let v = e.eval(x);
                (v * v).min(k * k)
            }
        }
    }

    /// Lipschitz constant with respect to the ℓ¹ norm, from the tree shape.
    pub fn structural_lipschitz(&self) -> f64 {
        match self {
            Expr::Lit(_) => 0.0,
            Expr::Var(_) => 1.0,
            Expr::Neg(e) | Expr::Abs(e) => e.structural_lipschitz(),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.structural_lipschitz() + b.structural_lipschitz()
            }
            Expr::Scale(c, e) => c.abs() * e.structural_lipschitz(),
            Expr::Min(es) | Expr::Max(es) => es
                .iter()
                .map(Expr::structural_lipschitz)
                .fold(0.0, f64::max),
            Expr::Clamp(e, lo, hi) => e
                .structural_lipschitz()
                .max(lo.structural_lipschitz())
                .max(hi.structural_lipschitz()),
            Expr::Sqcap(e, k) => 2.0 * k.abs() * e.structural_lipschitz(),
        }
    }

    fn max_abs_literal(&self) -> f64 {
        match self {
            Expr::Lit(c) => c.abs(),
            Expr::Var(_) => 0.0,
            Expr::Neg(e) | Expr::Abs(e) => e.max_abs_literal(),
            Expr::Add(a, b) | Expr::Sub(a, b) => a.max_abs_literal().max(b.max_abs_literal()),
            Expr::Scale(_, e) => e.max_abs_literal(),
            Expr::Min(es) | Expr::Max(es) => {
                es.iter().map(Expr::max_abs_literal).fold(0.0, f64::max)
            }
            Expr::Clamp(e, lo, hi) => e
                .max_abs_literal()
                .max(lo.max_abs_literal())
                .max(hi.max_abs_literal()),
            Expr::Sqcap(e, k) => e.max_abs_literal().max(k.abs()),
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Lit(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Abs(e) | Expr::Scale(_, e) | Expr::Sqcap(e, _) => e.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) => a.max_var().max(b.max_var()),
            Expr::Min(es) | Expr::Max(es) => es.iter().filter_map(Expr::max_var).max(),
            Expr::Clamp(e, lo, hi) => e.max_var().max(lo.max_var()).max(hi.max_var()),
        }
    }

    /// Replaces every variable by the expression `f(index)`.
    pub fn substitute(&self, f: &dyn Fn(usize) -> Expr) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(f));
        match self {
            Expr::Lit(c) => Expr::Lit(*c),
            Expr::Var(i) => f(*i),
            Expr::Neg(e) => Expr::Neg(sub(e)),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Scale(c, e) => Expr::Scale(*c, sub(e)),
            Expr::Min(es) => Expr::Min(es.iter().map(|e| e.substitute(f)).collect()),
            Expr::Max(es) => Expr::Max(es.iter().map(|e| e.substitute(f)).collect()),
            Expr::Abs(e) => Expr::Abs(sub(e)),
            Expr::Clamp(e, lo, hi) => Expr::Clamp(sub(e), sub(lo), sub(hi)),
            Expr::Sqcap(e, k) => Expr::Sqcap(sub(e), *k),
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, name: &str, es: &[Expr]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{e}")?;
    }
    write!(f, ")")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "neg({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Scale(c, e) => write!(f, "({c} * {e})"),
            Expr::Min(es) => write_list(f, "min", es),
            Expr::Max(es) => write_list(f, "max", es),
            Expr::Abs(e) => write!(f, "abs({e})"),
            Expr::Clamp(e, lo, hi) => write!(f, "clamp({e}, {lo}, {hi})"),
            Expr::Sqcap(e, k) => write!(f, "sqcap({e}, {k})"),
        }
    }
}

/// A parsed payoff together with its declared number of arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffExpr {
    root: Expr,
    arity: usize,
}

impl PayoffExpr {
    pub fn new(root: Expr, arity: usize) -> Result<Self> {
        if arity == 0 {
            return input("payoff arity must be at least 1");
        }
        if let Some(m) = root.max_var() {
            if m >= arity {
                return input(format!(
                    "variable x{} exceeds declared arity {arity}",
                    m + 1
                ));
            }
        }
        Ok(Self { root, arity })
    }

    pub fn constant(c: f64, arity: usize) -> Self {
        Self {
            root: Expr::Lit(c),
            arity: arity.max(1),
        }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.arity {
            return input(format!(
                "payoff has arity {} but point has {} coordinates",
                self.arity,
                point.len()
            ));
        }
        Ok(self.root.eval(point))
    }

    /// Evaluation without the arity check, for hot loops that have already
    /// validated the shape.
    #[inline]
    pub fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.root.eval(point)
    }

    pub fn structural_lipschitz(&self) -> f64 {
        self.root.structural_lipschitz()
    }

    /// Largest absolute literal in the tree; used to widen truncation boxes
    /// so that kinks such as clamp levels stay inside the grid.
    pub fn support_hint(&self) -> f64 {
        self.root.max_abs_literal()
    }

    /// Replaces variables, producing a payoff of a new arity.
    pub fn substitute(&self, new_arity: usize, f: &dyn Fn(usize) -> Expr) -> Result<Self> {
        Self::new(self.root.substitute(f), new_arity)
    }

    /// Splits increment `k` into two consecutive increments whose sum feeds
    /// the original argument. The result has arity `arity + 1` and does not
    /// depend on how the split increment is divided.
    pub fn split_increment(&self, k: usize) -> Result<Self> {
        if k >= self.arity {
            return input(format!("cannot split increment {k} of a {}-ary payoff", self.arity));
        }
        self.substitute(self.arity + 1, &|i| {
            use std::cmp::Ordering::*;
            match i.cmp(&k) {
                Less => Expr::Var(i),
                Equal => Expr::Add(Box::new(Expr::Var(k)), Box::new(Expr::Var(k + 1))),
                Greater => Expr::Var(i + 1),
            }
        })
    }

    /// `self + other` on the same arguments.
    pub fn plus(&self, other: &PayoffExpr) -> Result<Self> {
        Self::new(
            Expr::Add(Box::new(self.root.clone()), Box::new(other.root.clone())),
            self.arity.max(other.arity),
        )
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            root: Expr::Scale(c, Box::new(self.root.clone())),
            arity: self.arity,
        }
    }

    /// `self + c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            root: Expr::Add(Box::new(self.root.clone()), Box::new(Expr::Lit(c))),
            arity: self.arity,
        }
    }
}

impl fmt::Display for PayoffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
