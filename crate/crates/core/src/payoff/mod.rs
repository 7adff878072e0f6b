//! A small expression language for bounded-Lipschitz payoffs.
//!
//! Grammar (standard precedence, left associative):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary ("*" unary)*          at least one side of "*" is a literal
//! unary   := "-" unary | primary
//! primary := number | var | call | "(" expr ")"
//! var     := "x1" | "x2" | ... | "x"     ("x" is "x1")
//! call    := ("min" | "max") "(" expr ("," expr)+ ")"
//!          | ("abs" | "neg") "(" expr ")"
//!          | "clamp" "(" expr "," expr "," expr ")"
//!          | "sqcap" "(" expr "," number ")"   min(e², K²)
//! ```
//!
//! Products are restricted to `literal * expr` so that every expression is
//! globally Lipschitz with a constant computable from the tree.

mod ast;
mod certify;
mod parser;

pub use ast::{Expr, PayoffExpr};
pub use certify::{certify, PayoffCertificate};
pub use parser::parse;
