//! Numerical potential theory for isotropic Lévy-type kernels on R^d.
//!
//! The crate turns the scale-invariant Harnack machinery for such kernels
//! into executable checks: radial Green-scale validation, ball capacities as
//! finite linear programs with duality certificates, exact ball exit-law
//! Monte Carlo (walk-on-spheres hitting estimates, exit-law consistency,
//! jump-measure comparison), the constant pipeline assembling the explicit
//! Harnack bound, and direct verification of the Harnack inequality on
//! families of positive harmonic functions.
//!
//! Everything is deterministic: samplers derive per-sample substreams from
//! `(seed, index)`, so estimates are bit-identical for any worker count.

pub mod capacity;
pub mod constants;
pub mod error;
pub mod exec;
pub mod exitlaw;
pub mod geom;
pub mod harnack;
pub mod model;
pub mod montecarlo;
pub mod quad;
pub mod report;
pub mod scale;

mod lp;

pub use error::{Error, Result};
pub use exec::configure_threads;
pub use geom::{Ball, Point};
pub use model::{ModelKind, ProcessModel};
pub use scale::GreenScale;
