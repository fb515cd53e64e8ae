//! Pseudo-spectral toolkit for drift-diffusion equations with fractional
//! dissipation on the periodic torus, centered on the critical 2D surface
//! quasi-geostrophic (SQG) equation, together with a diagnostics suite that
//! measures level-set energy inequalities, truncation-energy recursions,
//! barrier functions, an isoperimetric constant, a sine-eigenfunction
//! Galerkin scheme, and local Hölder exponents.
//!
//! Layout:
//! - [`grid`], [`field`], [`fft`], [`spectral`]: periodic grids, physical and
//!   spectral fields, and all Fourier-multiplier operators (fractional
//!   Laplacian, Riesz transforms, derivatives, dealiasing, seminorms).
//! - [`extension`]: harmonic extension to the upper half space, the
//!   normal-derivative realization of the half Laplacian, and the Poisson
//!   kernel.
//! - [`solver`]: integrating-factor RK4 time stepper for
//!   `∂_t θ + v·∇θ = −κ Λ^β θ` with SQG, prescribed, or zero drift, and the
//!   Duhamel-representation residual.
//! - [`galerkin`]: Dirichlet sine eigenbasis on a box, antisymmetric
//!   transport coupling, and the associated energy identity.
//! - [`degiorgi`]: truncations, level-set energies, the `U_k` recursion,
//!   L∞ decay measurement, the convexity pointwise inequality, the local
//!   energy inequality, and a dyadic BMO seminorm.
//! - [`barriers`]: barrier functions on cube and strip domains, the
//!   constants ledger, and the isoperimetric measurement.
//! - [`regularity`]: oscillation over parabolic cylinders, drift-corrected
//!   moving frames, renormalization sequences, and Hölder-exponent fits.
//! - [`io`], [`report`]: snapshot file formats, diagnostics CSV, and flat
//!   JSON reports.
//!
//! All operations are pure functions of immutable inputs. With the
//! `parallel` feature (default) the expensive inner loops run on rayon;
//! scalar reductions are always sequential so results are bit-identical
//! for any thread count.

pub mod barriers;
pub mod degiorgi;
pub mod error;
pub mod extension;
pub mod fft;
pub mod field;
pub mod galerkin;
pub mod grid;
pub mod initial;
pub mod io;
pub mod par;
pub mod quad;
pub mod regularity;
pub mod report;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{PhysicalField, SpectralField};
pub use grid::Grid;
