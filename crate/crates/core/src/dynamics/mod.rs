//! Fixed-excitation bases, sparse operators and time integration.
//!
//! Pure states live in one excitation sector (every Hamiltonian here
//! conserves the excitation number). Density matrices live on the direct
//! sum of sectors `0..=N_max`, which the dissipators never leave because
//! they only lower excitations.

mod basis;
mod lindblad;
mod operators;
mod sampling;
mod schrodinger;
mod state;
mod trajectory;

pub use basis::{binomial, mask_of, BasisSet, SectorBasis, TruncatedBasis, MAX_BASIS_SIZE, MAX_SITES};
pub use lindblad::{
    evolve_lindblad, DensityMatrix, LindbladEvolution, LindbladGenerator, DENSITY_EIGENVALUE_FLOOR,
    DENSITY_HERMITICITY_TOLERANCE, DENSITY_TRACE_TOLERANCE, MAX_STEP_RATE,
};
pub use operators::{lowering_matrix, number_weights, HoppingTerms};
pub use sampling::{spin_sampling_run, total_variation, SamplingOptions, SpinSamplingResult};
pub use schrodinger::{
    evolve_schrodinger, expm_krylov, Evolution, Hamiltonian, Integrator, ParametricHamiltonian, HERMITICITY_TOLERANCE,
};
pub use state::{occupied_sites, Amplitude, SectorOperator, SectorState, SparseState, StateDump};
pub use trajectory::TrajectoryWriter;

use crate::Result;

/// Evolves a sector state; see [`evolve_schrodinger`].
pub fn evolve_state<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &SectorState,
    t_end: f64,
    dt: f64,
    integrator: Integrator,
    observe: impl FnMut(f64, &[crate::Complex64]),
) -> Result<(SectorState, Evolution)> {
    let evolution = evolve_schrodinger(h, psi0.amplitudes(), t_end, dt, integrator, observe)?;
    let state = SectorState::new(psi0.basis().clone(), evolution.state.clone())?;
    Ok((state, evolution))
}
