//! Reduced dynamics of confined matter weakly coupled to the quantized
//! electromagnetic field, and its Markovian (Lindblad) approximation.
//!
//! The library implements both sides of the weak-coupling story for a
//! fixed matter system (a confined electron, a spin-1/2 in a constant
//! magnetic field) interacting with a transverse photon field under a
//! smooth ultraviolet cutoff:
//!
//! * [`model`] — matter eigenbases (harmonic, quartic, spin-1/2),
//!   ultraviolet cutoffs, Sobolev diagnostic norms;
//! * [`coupling`] — the photon-matter coupling fields, the operator
//!   `E(k)` in the matter eigenbasis, and its free Heisenberg evolution;
//! * [`lindblad`] — the finite-time generator `L(t,g)`, its `t → ∞`
//!   transition-rate matrix, decay kernels, and the Markov semigroup on
//!   level populations;
//! * [`fock`] — ground truth: photon-number-truncated Fock space over a
//!   discretized mode set, Lanczos propagation of the full Hamiltonian
//!   `H(g)`, and the vacuum reduction of Heisenberg observables;
//! * [`harness`] — experiments comparing the two sides: master-equation
//!   residuals, generator convergence rates, cutoff comparisons, and
//!   population dynamics versus the rate-matrix semigroup.
//!
//! All public operations are pure functions over immutable inputs and
//! are safe to call from multiple threads. Internal parallelism uses
//! rayon with fixed reduction orders, so results are bit-reproducible
//! for a given configuration regardless of thread count.

pub mod coupling;
pub mod error;
pub mod fock;
pub mod harness;
pub mod lindblad;
pub mod model;
pub mod quadrature;

pub use error::{Error, Result};

/// Complex double-precision scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix in the matter eigenbasis.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;

/// Dense complex vector (Fock-space states, matter states).
pub type CVector = nalgebra::DVector<C64>;
