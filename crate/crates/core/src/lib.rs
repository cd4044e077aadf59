//! Spectral simulation and analysis of the 1D defocusing nonlinear
//! Schrödinger equation with steplike potentials,
//!
//! ```text
//! i∂_t u = -∂²_x u + V(x) u + |u|^α u,
//! ```
//!
//! on a uniform periodic grid. The crate provides the linear flows, a Strang
//! split-step solver, conserved functionals and space-time diagnostics, and
//! constructive scattering tools (wave operators, double-channel extraction,
//! profile decomposition).

pub mod cli_io;
pub mod diagnostics;
pub mod error;
pub mod nls;
pub mod potentials;
pub mod scattering;
pub mod propagators;
pub mod spectral;

pub use error::{Result, SnlsError};
pub use num_complex::Complex64;
