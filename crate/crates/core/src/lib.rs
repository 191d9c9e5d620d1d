//! Control-design toolkit for single-input mechanical systems: nonlinear
//! affine models, optimization-based linearization at an operating point,
//! LQR state-feedback synthesis with an exact mapping onto a bank of PD
//! controllers, and fixed-step closed-loop simulation.
//!
//! The crate is `no_std` (with `alloc`); all IO, configuration and file
//! formats live in the companion CLI crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod control;
pub mod error;
pub mod linearize;
pub mod lqr;
pub mod model;
pub mod robot;
pub mod sim;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
