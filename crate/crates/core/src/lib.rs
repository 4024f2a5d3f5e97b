//! Exact and Monte Carlo tooling for the headway exclusion process (HEP):
//! an exclusion process on the torus or the line whose jump rates depend on
//! the distance to the nearest particle in the jump direction.
//!
//! The crate computes the process's invariant (headway) measures and their
//! partition functions, exact stationary currents and the thermodynamic
//! current-density relation with its condensation plateau, runs event-driven
//! kinetic Monte Carlo, and verifies the reverse duality between the totally
//! asymmetric process on the line and a single random walk, both by exact
//! linear algebra and by simulation.

pub mod combinadics;
pub mod current;
pub mod duality;
pub mod error;
pub mod generator;
pub mod lattice;
pub mod measures;
pub mod numerics;
pub mod potential;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
