//! Computational toolkit for metric Diophantine approximation with
//! congruentially constrained numerators.
//!
//! The crate is organised bottom-up:
//!
//! - [`arith`]: factorization, `phi`, `tau`, `omega`, and the counts
//!   `u_d(n)` (d-th roots of unity) and `r_d(n)` (d-th power residues),
//!   each paired with a brute-force oracle.
//! - [`residue_group`]: the unit group `(Z/nZ)^x` as a product of cyclic
//!   factors, explicit subgroups and cosets.
//! - [`characters`]: Dirichlet characters, quotient characters of a
//!   subgroup, partial character sums and the Polya-Vinogradov bound.
//! - [`equidist`]: exact counts of integers in a coset below `X`, the
//!   character-sum counting identity, explicit error bounds and exact
//!   interval-system measures.
//! - [`experiment`]: hypothesis checks, exact hit-finding and a seeded
//!   Monte Carlo estimate of how often sampled reals are approximated.
//! - [`verify`]: the cross-module invariant suite behind `cds verify`.
//!
//! All measures, densities and approximation inequalities are exact
//! rationals ([`Rational`]); floating point only appears in character sums
//! and in reported bounds.

pub mod arith;
pub mod characters;
pub mod equidist;
mod error;
pub mod experiment;
pub mod format;
pub mod rational;
pub mod residue_group;
pub mod verify;

pub use arith::{factor, Factorization};
pub use characters::DirichletCharacter;
pub use equidist::{CountEstimate, IntervalSystem};
pub use error::{Error, Result};
pub use experiment::{ConditionsReport, ExperimentConfig, HitRecord};
pub use rational::Rational;
pub use residue_group::{Coset, Subgroup, UnitGroup};

/// Version tag written into every JSON config and summary.
pub const SCHEMA_VERSION: u32 = 1;
