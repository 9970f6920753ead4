//! Numerical laboratory for the 2D step oscillator: a separable oscillator
//! whose configuration space excludes an impenetrable quadrant-shaped step.
//!
//! The crate covers the classical side (impact dynamics on level sets, the
//! angle-coordinate picture and its folding onto an L-shaped billiard), the
//! semiclassical side (EBK ladders for resonant harmonic cases, phase-space
//! volume and Weyl counting), the quantum side (finite-difference
//! discretization of `-½∇² + V` with the step enforced, and a spectrum-slicing
//! eigensolver for the low end of the spectrum), and the diagnostics used to
//! compare them (level-spacing statistics against Poisson / semi-Poisson /
//! GOE-Wigner laws, product-state construction, perturbation mixing metrics
//! and the wavefunction-concentration indicator).
//!
//! The crate is `no_std`-compatible (requires `alloc`); enable the `libm`
//! feature instead of the default `std` feature for freestanding builds.
//! All operations are pure given immutable inputs and deterministic for a
//! fixed seed.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("steposc-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod banded;
pub mod dynamics;
pub mod ebk;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod lanczos;
mod math;
pub mod operator;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod solve1d;
pub mod stats;
pub mod tridiag;
pub mod wavefn;
pub mod weyl;

pub use error::CoreError;
pub use potential::{LevelSetGeometry, PotentialSpec};
