//! Closed-loop simulation and numerical certificates for feedback
//! stabilization of linear systems `y' = Ay - mu*BCy` and of bilinear
//! systems under bang-bang control, on `L1` and sup-norm state spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`banach`]: grids, grid functions, norms and duality-map selections.
//! * [`semigroup`]: exact shift semigroups, the Neumann heat semigroup and
//!   resolvent operations on tridiagonal generators.
//! * [`operators`]: control/observation operator classes, their X-parts and
//!   the resolvent-smoothed pairing functional.
//! * [`closedloop`]: closed-loop integrators and feedback laws.
//! * [`certificates`]: sampled estimates of admissibility and observability
//!   constants, the gain window and the per-period decay factor.
//! * [`cli`]: configuration, subcommands and report emission.

pub mod banach;
pub mod certificates;
pub mod cli;
pub mod closedloop;
pub mod error;
pub mod operators;
pub mod semigroup;

pub use error::{Error, Result};
