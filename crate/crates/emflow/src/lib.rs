//! Worldlines of charged particles in curved spacetime.
//!
//! Three different "find a charged-particle trajectory between two events"
//! problems circulate in the literature and are easy to conflate:
//!
//! 1. the Lorentz force equation (LFE), parametrized by proper time with the
//!    velocity normalized a priori and a prescribed charge-to-mass ratio;
//! 2. the electromagnetic flow equation (EFE), the same algebraic form with
//!    no normalization, whose solution set is infinitely larger;
//! 3. the fixed-parameter variational problem for the energy-type functional
//!    `J`, whose timelike extremals solve the LFE with a ratio determined
//!    only a posteriori by the constraint `(q/m) ∫ds = Q Δλ`.
//!
//! This crate implements all three, their variational formulations
//! (functionals `I`, `J`, `J̃`, `K`), the reparametrization maps between
//! them, the charge-to-mass recovery observable, and a two-point shooting
//! solver that connects chronologically related events, so the relations
//! between the problems can be checked numerically rather than argued.
//!
//! Conventions: metric signature `(+,−,…,−)`, coordinate 0 is time, `c = 1`,
//! all quantities dimensionless. The electromagnetic field is `F = dω` with
//! `(dω)_{μν} = ∂_μ ω_ν − ∂_ν ω_μ`, and the charged-particle action is
//! `I = ∫ (ds + (q/m) ω)`.

pub mod connect;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod functionals;
pub mod geometry;
pub mod scene;
pub mod tol;

pub use error::{Error, Result};
