//! Matter qubits coupled through a multiport linear-optical circuit.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense complex matrices, Haar sampling, permanents and
//!   reproducible random streams.
//! - [`interferometer`]: two-port cell meshes, their momentum-dependent
//!   unitaries and the triangular decomposition of arbitrary unitaries.
//! - [`effective`]: the coherent XY spin model of a closed circuit, the
//!   collective Lindblad generator of an open circuit and the synthesis of a
//!   circuit from a target coupling matrix.
//! - [`dynamics`]: excitation-sector bases, sparse operators and the
//!   Schrödinger / Lindblad integrators.
//! - [`darkstates`]: exact and crowded dark states and their decay rates.
//! - [`bosonsampling`]: boson-sampling states and the adiabatic protocols
//!   that prepare them in bosonic modes or in qubits.
//!
//! Register layout: with `M` ports there are `2M` qubits. Input qubit `m`
//! occupies site `m` and output qubit `n` occupies site `M + n`.

pub mod bosonsampling;
pub mod darkstates;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod interferometer;
pub mod linalg;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Site index of input qubit `m`.
#[inline]
pub fn input_site(m: usize) -> usize {
    m
}

/// Site index of output qubit `n` in a register with `ports` ports.
#[inline]
pub fn output_site(ports: usize, n: usize) -> usize {
    ports + n
}
