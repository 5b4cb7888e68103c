//! Boson-sampling target states, their hard-core analogue, and the adiabatic
//! sweeps that prepare them in the bosonic and spin models.

mod fock;
mod sweep;

pub use fock::{bs_state, BosonSamplingState, FockBasis};
pub use sweep::{
    adiabatic_sweep_boson, adiabatic_sweep_spin, boson_sweep_hamiltonian, hardcore_bs_state, project_hardcore,
    spin_sweep_hamiltonian, state_distance, sweep_comparison, BosonSweep, SpinSweep, StateDistance, SweepProfile,
    SweepResult, SweepSchedule,
};
