//! Quasi-optimal multi-index sets for exponential coefficient-bound models.
//!
//! The crate builds the index sets that keep the `M` largest values of
//! `prefactor * e^{-b(nu)}`, computes the exact truncation tails they leave
//! behind, and evaluates the sharpness estimates that bracket those tails.
//! The limiting-set geometry (volumes, lattice counts, Ehrhart
//! quasi-polynomials) is exposed alongside.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimates;
pub mod index_sets;
pub mod polytope;
pub mod presets;
pub mod sum;
pub mod tails;

pub use bounds::{AffineTerm, AssumptionReport, BoundModel, Family, HClass, MultiIndex};
pub use error::{Error, Result};
