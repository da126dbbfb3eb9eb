//! Harmonic-balance proxy solver.
//!
//! The model problem is a linear advection-diffusion equation for each of
//! the `npde` variables, coupled across the `2 * nharms + 1` harmonic planes
//! by the time-spectral derivative:
//!
//! ```text
//! R = nu * (4 q - q[i-1] - q[i+1] - q[j-1] - q[j+1]) / h^2
//!   + a * (q[i+1] - q[i-1]) / (2 h)
//!   + sum_{m != n} D[n][m] q[m]
//!   + s(p, n, x, y)
//! ```
//!
//! with `nu = 0.05`, `a = 1` and a forcing `s` that is nonzero on planes 1
//! and 2 only. Pseudo-time marching uses a four-stage scheme with a halo
//! exchange after every stage.

mod field;
mod forces;
mod residual;
mod rk;
mod spectral;

pub(crate) use field::FieldView;
pub use field::{BlockField, HarmonicField};
pub use forces::{compute_forces, ForceCoefficients};
pub use residual::{forcing, initial_value, residual, BlockForcing, ADVECTION, NU};
pub use rk::{RankSolver, RkScheme, RK_ALPHA};
pub use spectral::SpectralDeriv;

/// Number of solution variables per cell. Fixed.
pub const NPDE: usize = 4;
