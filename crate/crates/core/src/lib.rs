//! Identical-particle quantum statistics.
//!
//! The crate is organised bottom-up:
//!
//! * [`wavepacket`]: the analytic free Gaussian packet, its spreading, and
//!   quadrature overlaps used as the single-particle inner product.
//! * [`symmetry`]: finite N-particle states as sums of labelled products,
//!   label/parameter permutations, (anti)symmetrizers, permanents and
//!   determinants of overlap matrices, and transition amplitudes.
//! * [`spinstat`]: the one-sense rotation construction that turns a
//!   parameter exchange of two spinor modes into the factor `(-1)^(2s)`.
//! * [`counting`]: exact Bose/Fermi/Boltzmann state counts, brute-force
//!   enumeration oracles, classical-limit corrections and entropies.
//! * [`distributions`]: Bose-Einstein/Fermi-Dirac spectra, the chemical
//!   potential solver and a maximum-entropy route to the same spectra.
//! * [`balance`]: populations of s-fold condensed packets, the detailed
//!   balance equation, its geometric stationary solution and a relaxation
//!   scheme that drives arbitrary populations onto it.

pub mod balance;
pub mod counting;
pub mod distributions;
pub mod spinstat;
pub mod symmetry;
pub mod wavepacket;

pub use num_complex::Complex64;
