//! Simulation and verification toolkit for stochastic geometric mechanics.
//!
//! The crate integrates stochastic implicit Euler-Lagrange equations driven
//! by arbitrary noise semimartingales, evaluates the Hamilton-Pontryagin
//! action pathwise, constructs stopping-time-localized fixed-endpoint
//! variations, and numerically checks the variational equivalences
//! (stationarity of the action against solutions of the equations),
//! conservation laws, and a discrete fundamental-lemma harness — all on
//! discretized sample paths.
//!
//! Modules, bottom up:
//!
//! - [`paths`]: time grids, sample paths, seeded noise, stopping times.
//! - [`calculus`]: pathwise Ito / Stratonovich integrals and covariation.
//! - [`mechanics`]: Lagrangian systems, Legendre transform, energies.
//! - [`catalog`]: built-in systems referenced by name.
//! - [`integrators`]: implicit midpoint for implicit Euler-Lagrange,
//!   Hamiltonian, and generic Stratonovich-operator equations.
//! - [`variational`]: variations, actions, stationarity, Noether charges,
//!   fundamental-lemma harness.
//! - [`scenario`]: config-driven experiment runner behind the CLI.
//!
//! Every operation is a pure function over immutable data; paths may be
//! generated and processed in parallel across seeds.
//!
//! ```
//! use std::sync::Arc;
//! use sgmech::catalog;
//! use sgmech::integrators::integrate_implicit_el;
//! use sgmech::paths::{sample_noise, NoiseSpec, TimeGrid};
//! use sgmech::variational::stationarity_test;
//!
//! let grid = Arc::new(TimeGrid::uniform(1.0, 400)?);
//! let sys = catalog::planar_central_potential(1.0, 0.25, 0.5, 0.25, 0.0);
//! let noise = sample_noise(&NoiseSpec::time_and_brownian(sys.k()), &grid, 7)?;
//! let path = integrate_implicit_el(&sys, &noise, &[1.0, 0.0], &[0.1, 0.9])?;
//!
//! // solutions make the pathwise action stationary
//! let report = stationarity_test(&sys, &noise, &path, 25, 7, 1.0, 1e-3)?;
//! assert!(report.max_abs_derivative < 5e-3);
//! # Ok::<(), sgmech::Error>(())
//! ```

pub mod calculus;
pub mod catalog;
pub mod error;
pub mod integrators;
mod linalg;
pub mod mechanics;
pub mod paths;
pub mod scenario;
pub mod variational;

pub use error::{Error, Result};
