//! Sublinear (G-)expectations of functionals of G-Brownian motion.
//!
//! Three routes compute the same quantities and check each other:
//!
//! * [`gheat`]: an explicit monotone finite-difference solver for the
//!   G-heat equation `∂u/∂t − G(∂²u) = 0`;
//! * [`cylinder`]: backward dynamic programming over the increments of a
//!   cylinder payoff, one G-heat reduction per increment;
//! * [`mc`]: Monte Carlo under volatility-controlled paths, which gives lower
//!   bounds for finite policy sets and a near-optimal bang-bang policy.
//!
//! [`discrete`] holds the finite-model toolkit (upper expectations,
//! capacities, function-space membership) and [`holder`] the empirical
//! Kolmogorov continuity diagnostics.

pub mod cylinder;
pub mod discrete;
pub mod error;
pub mod gfunction;
pub mod gheat;
pub mod holder;
pub mod mc;
pub mod payoff;
pub mod sum;

pub mod cli;

pub use error::{Error, Result};
pub use gfunction::{SymMatrix, ThetaSet};
pub use payoff::PayoffExpr;
