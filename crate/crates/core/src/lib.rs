//! Numerical laboratory for modified scattering of the one-dimensional cubic
//! nonlinear Schrödinger equation `i∂_t u = -½∂_x²u + V u + λ|u|²u` with
//! long-range potentials.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: periodic grids, the unitary Fourier transform, Sobolev norms,
//!   dilation and modulation operators.
//! - [`potentials`]: long-range, short-range and compactly supported parts,
//!   the smooth cutoff and the time-dependent effective potential.
//! - [`hj`]: bicharacteristics, the generating function and the phase `Ψ`.
//! - [`profile`]: the scattering datum and the modified asymptotic profile.
//! - [`propagator`]: the free group and split-step evolution of the full equation.
//! - [`final_state`]: residual terms, backward shooting and the Picard probe.
//! - [`diagnostics`]: rate fits, envelope checks and conservation audits.
//! - [`verify`]: the lemma-shaped property suite.

pub mod diagnostics;
pub mod error;
pub mod final_state;
pub mod grid;
pub mod hj;
pub mod jet;
pub mod potentials;
pub mod profile;
pub mod propagator;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{ComplexField, Direction, Space, SpatialGrid, C64};

use std::fmt;

/// Shortest round-trip decimal form of an `f64`: positional for moderate
/// magnitudes, exponent form outside `[1e-5, 1e16)`. Parsing it back with
/// `str::parse` returns the same value.
#[derive(Clone, Copy, Debug)]
pub struct Num(pub f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

/// One CSV row of numbers.
pub fn write_csv_row<W: std::io::Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            w.write_all(b",")?;
        }
        write!(w, "{}", Num(*v))?;
    }
    w.write_all(b"\n")
}
