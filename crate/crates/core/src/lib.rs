//! Finite element solver for the Cahn-Hilliard-Navier-Stokes system with
//! invariant energy quadratization (IEQ) time stepping.
//!
//! Taylor-Hood P2/P1 elements on structured triangulations, first and second
//! order BDF schemes, and a pressure-correction projection. The crate is
//! `no_std` compatible (with `alloc`) when the default `std` feature is off.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assembly;
pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod fespace;
pub mod ieq;
pub mod linalg;
pub mod manufactured;
pub mod math;
pub mod mesh;
pub mod stepper;

pub use error::{Error, Result};
