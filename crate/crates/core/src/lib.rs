//! Simulation and analysis of orbital-angular-momentum (OAM) entangled photon
//! pairs produced by spontaneous parametric down-conversion (SPDC) with a
//! pump beam engineered as a superposition of Laguerre-Gauss modes.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`lg`]: Laguerre-Gauss field evaluation and per-charge waist adjustment.
//! - [`spectrum`]: joint biphoton amplitude tables from the mode overlap
//!   integral, by direct quadrature and by a closed-form radial sum.
//! - [`engineering`]: inverse solve for pump coefficients that produce a
//!   target entangled state in the `{(-1,-1),(0,0),(1,1)}` OAM subspace.
//! - [`measurement`]: projective coincidence simulation, phase-scan
//!   interference curves, visibilities, Poisson count generation and
//!   offset-phase fits.
//! - [`bell`]: CGLMP Bell quantity for qudits, coincidence surfaces and a
//!   deterministic settings search.
//! - [`tomography`]: mutually-unbiased-basis state tomography with linear
//!   inversion and maximum-likelihood refinement, fidelity/entropy metrics
//!   and Poisson bootstrap errors.
//! - [`hologram`]: amplitude-encoded phase-only SLM holograms with blazing,
//!   rendered to deterministic byte buffers.
//!
//! Everything is `no_std + alloc`; IO, file formats and the command-line
//! front end live in the companion `oam-mes-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bell;
pub mod engineering;
pub mod hologram;
pub mod lg;
pub mod linalg;
pub mod measurement;
pub mod quad;
pub mod qstate;
pub mod spectrum;
pub mod tomography;

pub use num_complex::Complex64;

/// Wrap an angle into `[0, 2 pi)`.
pub(crate) fn wrap_tau(x: f64) -> f64 {
    let tau = core::f64::consts::TAU;
    let r = x % tau;
    if r < 0.0 {
        r + tau
    } else {
        r
    }
}

