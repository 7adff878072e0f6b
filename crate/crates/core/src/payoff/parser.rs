use super::ast::{Expr, PayoffExpr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Comma,
    End,
}

fn err<T>(offset: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset,
        msg: msg.into(),
    })
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'^' => return err(start, "exponent operator '^' is not part of the grammar; use sqcap(e, K)"),
            b'/' => return err(start, "division is not part of the grammar; multiply by a literal"),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => out.push((Tok::Num(v), start)),
                    _ => return err(start, format!("malformed number '{text}'")),
                }
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return err(start, format!("unexpected character '{ch}'"));
            }
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    arity: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            err(self.offset(), format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Star {
            let at = self.offset();
            self.bump();
            let rhs = self.unary()?;
            lhs = match (lhs, rhs) {
                (Expr::Lit(c), e) => Expr::Scale(c, Box::new(e)),
                (e, Expr::Lit(c)) => Expr::Scale(c, Box::new(e)),
                _ => return err(at, "product of two non-literal expressions; one factor must be a number"),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(match self.unary()? {
                Expr::Lit(c) => Expr::Lit(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.primary()
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect(Tok::LParen, "'('")?;
        let mut out = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen, "')' or ','")?;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Lit(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, at),
            Tok::End => err(at, "unexpected end of input"),
            t => err(at, format!("unexpected token {t:?}")),
        }
    }

    fn ident(&mut self, name: String, at: usize) -> Result<Expr> {
        if let Some(idx) = self.variable(&name, at)? {
            return Ok(Expr::Var(idx));
        }
        let arg_count = |n: usize, args: &Vec<Expr>, ok: bool| -> Result<()> {
            if ok {
                Ok(())
            } else {
                err(at, format!("{name} expects {n} argument(s), got {}", args.len()))
            }
        };
        match name.as_str() {
            "min" | "max" => {
                let args = self.args()?;
                arg_count(2, &args, args.len() >= 2)?;
                Ok(if name == "min" {
                    Expr::Min(args)
                } else {
                    Expr::Max(args)
                })
            }
            "abs" | "neg" => {
                let mut args = self.args()?;
                arg_count(1, &args, args.len() == 1)?;
                let e = Box::new(args.pop().unwrap());
                Ok(if name == "abs" { Expr::Abs(e) } else { Expr::Neg(e) })
            }
            "clamp" => {
                let args = self.args()?;
                arg_count(3, &args, args.len() == 3)?;
                let mut it = args.into_iter().map(Box::new);
                Ok(Expr::Clamp(
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap(),
                ))
            }
            "sqcap" => {
                let mut args = self.args()?;
                arg_count(2, &args, args.len() == 2)?;
                let k = match args.pop().unwrap() {
                    Expr::Lit(k) if k >= 0.0 => k,
                    _ => return err(at, "sqcap cap must be a nonnegative number literal"),
                };
                Ok(Expr::Sqcap(Box::new(args.pop().unwrap()), k))
            }
            _ => err(at, format!("unknown identifier '{name}'")),
        }
    }

    fn variable(&self, name: &str, at: usize) -> Result<Option<usize>> {
        if name == "x" {
            return Ok(Some(0));
        }
        let Some(digits) = name.strip_prefix('x') else {
            return Ok(None);
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Ok(None);
        }
        let k: usize = digits
            .parse()
            .map_err(|_| Error::Parse { offset: at, msg: format!("bad variable '{name}'") })?;
        if k == 0 || k > self.arity {
            return err(at, format!("variable '{name}' outside declared arity {}", self.arity));
        }
        Ok(Some(k - 1))
    }
}

/// Parses `source` as a payoff of `arity` arguments.
pub fn parse(source: &str, arity: usize) -> Result<PayoffExpr> {
    if arity == 0 {
        return err(0, "arity must be at least 1");
    }
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        arity,
    };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return err(p.offset(), "trailing input");
    }
    PayoffExpr::new(root, arity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(src: &str, arity: usize, x: &[f64]) -> f64 {
        parse(src, arity).unwrap().evaluate(x).unwrap()
    }

    #[test]
    fn min_with_literal() {
        assert_eq!(eval("min(x1, 2)", 1, &[3.0]), 2.0);
    }

    #[test]
    fn abs_difference_is_zero() {
        for x in [-3.5, 0.0, 1e6] {
            assert_eq!(eval("abs(x1) - abs(x1)", 1, &[x]), 0.0);
        }
    }

    #[test]
    fn non_literal_product_rejected() {
        let e = parse("x1 * x2", 2).unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 3, .. }), "{e:?}");
    }

    #[test]
    fn clamp_and_scaled_min() {
        assert_eq!(eval("clamp(x1, -1, 1)", 1, &[5.0]), 1.0);
        assert_eq!(eval("2*min(x1,x2) + 1", 2, &[0.0, -3.0]), -5.0);
    }

    #[test]
    fn exponent_rejected_at_parse_time() {
        let e = parse("max(min(x1^2, 3), 0)", 1).unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 10, .. }), "{e:?}");
    }

    #[test]
    fn diagnostics() {
        assert!(matches!(parse("foo(x1)", 1), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(parse("x3", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse("min(x1)", 1), Err(Error::Parse { .. })));
        assert!(matches!(parse("(x1", 1), Err(Error::Parse { offset: 3, .. })));
        assert!(matches!(parse("x1 x1", 1), Err(Error::Parse { offset: 3, .. })));
        assert!(matches!(parse("sqcap(x1, x1)", 1), Err(Error::Parse { .. })));
        assert!(matches!(parse("", 1), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn x_is_first_variable_and_sqcap() {
        assert_eq!(eval("sqcap(x, 5)", 1, &[3.0]), 9.0);
        assert_eq!(eval("sqcap(x1, 5)", 1, &[-7.0]), 25.0);
        assert_eq!(eval("-x1 * 3", 1, &[2.0]), -6.0);
        assert_eq!(eval("1e1 - 2.5e-1", 1, &[0.0]), 9.75);
    }

    #[test]
    fn split_increment_sums_arguments() {
        let p = parse("sqcap(x1, 5) + x2", 2).unwrap();
        let s = p.split_increment(0).unwrap();
        assert_eq!(s.arity(), 3);
        assert_eq!(s.evaluate(&[1.0, 2.0, 0.5]).unwrap(), 9.5);
    }

    fn arb_expr(arity: usize) -> impl Strategy<Value = Expr> {
        let lit = (-100i32..100).prop_map(|k| Expr::Lit(k as f64 / 4.0));
        let leaf = prop_oneof![lit, (0..arity).prop_map(Expr::Var)];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                ((-8i32..8), inner.clone()).prop_map(|(c, e)| Expr::Scale(c as f64 / 2.0, Box::new(e))),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Min),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Max),
                inner.clone().prop_map(|e| Expr::Abs(Box::new(e))),
                (inner.clone(), inner.clone(), inner.clone())
                    .prop_map(|(a, b, c)| Expr::Clamp(Box::new(a), Box::new(b), Box::new(c))),
                (inner, 0u32..10).prop_map(|(e, k)| Expr::Sqcap(Box::new(e), k as f64)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr(3)) {
            let p = PayoffExpr::new(e, 3).unwrap();
            let reparsed = parse(&p.to_string(), 3).unwrap();
            prop_assert_eq!(reparsed, p);
        }

        // Raising one argument of a min/max context never lowers the result.
        #[test]
        fn min_max_contexts_are_monotone(
            a in arb_expr(2), b in arb_expr(2), bump in 0.0f64..5.0,
            x1 in -10.0f64..10.0, x2 in -10.0f64..10.0,
        ) {
            let dominated = b.clone();
            let dominating = Expr::Add(Box::new(b), Box::new(Expr::Lit(bump)));
            for ctx in [Expr::Min as fn(Vec<Expr>) -> Expr, Expr::Max] {
                let lo = ctx(vec![a.clone(), dominated.clone()]).eval(&[x1, x2]);
                let hi = ctx(vec![a.clone(), dominating.clone()]).eval(&[x1, x2]);
                prop_assert!(hi >= lo);
            }
        }
    }
}
