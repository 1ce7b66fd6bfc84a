//! Numerical laboratory for the large-friction limit of kinetic swarming
//! models in one space dimension.
//!
//! Three levels of description are solved side by side:
//!
//! * [`kinetic`]: the kinetic equation with friction, confinement,
//!   interaction and local alignment, on a phase-space grid;
//! * [`hydro`]: pressureless Euler with damping and nonlocal forces, along
//!   particle characteristics;
//! * [`aggregation`]: the first-order aggregation equation, by its flow map.
//!
//! [`transport`] measures their distance in Wasserstein metrics,
//! [`functionals`] evaluates energies and stability bounds, and [`harness`]
//! runs the parameter sweeps.

pub mod aggregation;
pub mod functionals;
pub mod harness;
pub mod hydro;
pub mod kinetic;
pub mod particles;
pub mod potentials;
pub mod schedule;
pub mod transport;
