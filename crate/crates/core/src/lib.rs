//! Numerical core for ac-driven PT-symmetric complex crystals.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every piece of the
//! model that is pure computation:
//!
//! * [`lattice`]: the complex periodic potential and its Fourier series.
//! * [`bloch`]: non-Hermitian plane-wave band structure, symmetry-breaking
//!   scans, biorthogonal normalization and the dipole couplings of the
//!   single-band theory.
//! * [`quasienergy`]: ac drives, Floquet quasienergy bands and
//!   dynamic-localization (band collapse) points.
//! * [`singleband`]: exact characteristics solution of the driven single-band
//!   model.
//! * [`bragg`]: plane-wave Bragg cascade at the symmetry-breaking point,
//!   stationary points, jump factors and staircase analysis.
//! * [`numerics`] and [`eigen`]: special functions, quadrature, root finding,
//!   interpolation and the dense complex eigensolver used by everything above.
//!
//! Units: lengths in μm, potentials and energies in dimensionless refractive
//! index units, forces in index units per μm.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bloch;
pub mod bragg;
pub mod eigen;
pub mod lattice;
pub mod numerics;
pub mod quasienergy;
pub mod singleband;

pub use num_complex::Complex64;
