//! Numerical laboratory for two coupled Hatano–Nelson chains.
//!
//! The ladder carries non-reciprocal nearest-neighbour hopping `t1 ± delta_s`
//! on each chain `s ∈ {a, b}`, an interchain coupling `t0` and an on-site
//! detuning `±v`. It can be closed with open, periodic or Möbius boundaries;
//! the Möbius closure glues the end of each chain onto the start of the other.
//!
//! Module map:
//!
//! * [`lattice`]: parameter validation and dense Hamiltonian construction.
//! * [`analytic`]: Bloch matrix, closed-form periodic dispersion and the
//!   non-Bloch symbol functions.
//! * [`eigen`]: dense non-symmetric eigendecomposition (LAPACK `zgeev`) with
//!   biorthogonal left/right pairing.
//! * [`observables`]: IPR, chain polarization, mean position, chain profiles,
//!   localization-length fits and biorthogonal densities.
//! * [`criticality`]: total imaginary magnitude, transition detection, band
//!   polarization, real gap and the parameter-sweep engine.
//! * [`perturbation`]: skin-state ansatz and first-order boundary mixing.
//! * [`io`]: run configuration, CSV/JSON/SVG emission and run orchestration.

pub mod analytic;
pub mod criticality;
pub mod eigen;
mod error;
pub mod io;
pub mod lattice;
pub mod observables;
pub mod perturbation;

pub use error::{Error, Result};
pub use lattice::{BoundaryCondition, Chain, Hamiltonian, LadderParams};

pub use num_complex::Complex64;
