//! Generalized Boole-type transformations and their invariant measures.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`maps1d`]: the one-dimensional map catalog (generalized Boole, classical
//!   Boole, baker, Gauss, doubling) with preimage solving and complex fixed
//!   points;
//! * [`transfer`]: the Frobenius–Perron operator, invariant-density checks and
//!   Ulam discretization;
//! * [`measures`]: analytic invariant densities, quasi-measures built from
//!   upper-half-plane fixed points, and ergodicity classification;
//! * [`mgf`]: measure generating functions, Schur averages and Abel limits;
//! * [`conjugacy`]: the cotangent conjugacy to the doubling map;
//! * [`boole2d`]: two-dimensional and permutation Boole maps;
//! * [`ergostats`]: orbits, Birkhoff averages and empirical densities.
//!
//! File formats, parallel drivers and the command line live in the `boole`
//! crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod boole2d;
pub mod conjugacy;
pub mod ergostats;
pub mod error;
pub mod maps1d;
pub mod measures;
pub mod mgf;
pub mod poly;
pub mod quad;
pub mod transfer;

pub use error::{Error, Result};
pub use num_complex::Complex64;
