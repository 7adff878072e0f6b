//! Upper expectations and capacities over finite sample spaces.
//!
//! A [`FiniteModel`] stands in for a family of probability measures; the
//! upper expectation is `𝔼[X] = max_P E_P[X]` and the capacity
//! `c(A) = max_P P(A)`. The built-in constructors [`exm1`], [`exm2`] and
//! [`exm3`] produce truncations of three classical counterexample families.

mod checks;
mod functionals;
mod membership;
mod model;

pub use checks::{
    borel_cantelli_check, choquet_suite, monotone_convergence_check, uniform_integrability_check,
    BorelCantelliReport, Check, MonotoneConvergence, UniformIntegrability, SUMMABLE_BLOCK_RATIO,
};
pub use functionals::{
    capacity, markov_bound_check, point_capacities, scaled_capacity_decay, tail_functional,
    upper_expectation, upper_expectation_witness, MarkovCheck, Tail, CHECK_TOL,
};
pub use membership::{
    aitken, family_membership, family_upper_expectation, membership_report, quasi_continuity, Example, FamilyMembership,
    FamilyRow, MembershipReport, Metric, ModelFamily, QuasiContinuity, DEFAULT_SCHEDULE,
    EXM1_METRIC, VANISHING_TAIL,
};
pub use model::{exm1, exm2, exm3, Event, FiniteModel, MeasureSpec, ModelConfig, RandomVariable};
