//! Spectral toolkit for the linearized and nonlinear
//! Vlasov–Poisson–Fokker–Planck system around a global Maxwellian.
//!
//! Velocity space is represented in a truncated tensor-Hermite basis
//! attached to `sqrt(M)`; the spatial variable is handled mode by mode in
//! Fourier space, with `xi` reduced to `|xi| e_1` by rotational symmetry.
//!
//! Layering (each module only uses the ones above it):
//!
//! * [`basis`] — Hermite basis, `L`, projections and norms.
//! * [`linalg`], [`quadrature`], [`fit`] — numerical primitives.
//! * [`mode_ops`] — per-mode operators `B`, `B1`, `B2`, `A` and semigroups.
//! * [`fluid`] — closed-form fluid eigen-system.
//! * [`kernel`] — exact damped Fokker–Planck kernels.
//! * [`coherent`] — exact large-frequency propagator pieces.
//! * [`cutoff`], [`lowfreq`], [`highfreq`] — frequency split and hierarchies.
//! * [`radial`], [`assembly`] — physical-space reconstruction and decay fits.
//! * [`nonlinear`] — radially symmetric nonlinear solver and Picard iteration.
//! * [`validation`] — acceptance criteria with fixed tolerances.

pub mod assembly;
pub mod basis;
pub mod coherent;
pub mod cutoff;
pub mod error;
pub mod fit;
pub mod fluid;
pub mod highfreq;
pub mod kernel;
pub mod linalg;
pub mod lowfreq;
pub mod mode_ops;
pub mod nonlinear;
pub mod quadrature;
pub mod radial;
pub mod validation;

pub use basis::{BasisManifest, BasisSpec, ChainBlock, MultiIndex, Projection, VelocityVector};
pub use error::{Result, VpfpError};
pub use fit::{Component, DecayFit, LineFit};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
