use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::basis::{mask_of, BasisSet, SectorBasis};
use super::schrodinger::{evolve_schrodinger, Integrator};
use super::state::SectorOperator;
use crate::effective::SpinHamiltonian;
use crate::linalg::{permanent, ComplexMatrix, UnitaryMatrix};
use crate::{output_site, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SamplingOptions {
    /// Coupling scale `δ`; the spin couplings are `J = δ·Re U`.
    pub coupling: f64,
    /// Probe time; `π/δ` when unset.
    pub time: Option<f64>,
    /// Integration step in units of `1/δ`.
    pub dt: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            coupling: 1.0,
            time: None,
            dt: 0.05,
        }
    }
}

/// Output-pattern statistics of one spin-sampling run and of the bosonic
/// model with the same single-particle couplings.
#[derive(Debug, Clone, Serialize)]
pub struct SpinSamplingResult {
    pub ports: usize,
    pub excitations: usize,
    pub time: f64,
    pub coupling: f64,
    /// Sorted output ports holding the excitations, one entry per pattern.
    pub patterns: Vec<Vec<usize>>,
    pub spin_probabilities: Vec<f64>,
    pub boson_probabilities: Vec<f64>,
    /// Weight not accounted for by the patterns: excitations left on input
    /// qubits (spins) or on inputs/collided outputs (bosons).
    pub spin_other: f64,
    pub boson_other: f64,
    pub total_variation: f64,
}

/// `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Excites inputs `0..N`, evolves under `J = δ·Re U` for the probe time and
/// records the probability of every way of finding all `N` excitations on
/// distinct output qubits. The bosonic reference uses the permanent of the
/// output/input block of the single-particle propagator.
pub fn spin_sampling_run(u: &UnitaryMatrix, n: usize, opts: SamplingOptions) -> Result<SpinSamplingResult> {
    let m = u.dim();
    if n == 0 || n > m {
        return Err(Error::InvalidFilling {
            excitations: n,
            ports: m,
        });
    }
    if !(opts.coupling > 0.0) || !opts.coupling.is_finite() {
        return Err(Error::Domain(format!(
            "coupling must be positive, got {}",
            opts.coupling
        )));
    }
    let delta = opts.coupling;
    let time = opts.time.unwrap_or(PI / delta);
    let j = u.real_part() * delta;

    let spin = SpinHamiltonian::new(0.0, j.clone())?;
    let basis = Arc::new(SectorBasis::new(2 * m, n)?);
    let op = SectorOperator::from_terms(&spin.hopping_terms(), basis.clone());
    let mut psi0 = vec![Complex64::new(0.0, 0.0); basis.len()];
    let start: Vec<usize> = (0..n).collect();
    psi0[basis.index_of(mask_of(&start)).expect("initial pattern in sector")] = Complex64::new(1.0, 0.0);
    let evolved = evolve_schrodinger(&op.matrix, &psi0, time, opts.dt / delta, Integrator::Magnus4, |_, _| {})?;

    // single-particle propagator exp(−iH₁T) on the 2M modes
    let mut h1 = ComplexMatrix::zeros(2 * m, 2 * m);
    for a in 0..m {
        for b in 0..m {
            h1[(output_site(m, a), b)] = Complex64::new(j[(a, b)], 0.0);
            h1[(b, output_site(m, a))] = Complex64::new(j[(a, b)], 0.0);
        }
    }
    let eig = h1.symmetric_eigen();
    let phases = ComplexMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * time)));
    let prop = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();

    let out_basis = SectorBasis::new(m, n)?;
    let mut patterns = Vec::with_capacity(out_basis.len());
    let mut spin_p = Vec::with_capacity(out_basis.len());
    let mut boson_p = Vec::with_capacity(out_basis.len());
    for &pattern in out_basis.states() {
        let ports = super::state::occupied_sites(pattern);
        let sites: Vec<usize> = ports.iter().map(|&p| output_site(m, p)).collect();
        let idx = basis.index_of(mask_of(&sites)).expect("output pattern in sector");
        spin_p.push(evolved.state[idx].norm_sqr());
        let block = ComplexMatrix::from_fn(n, n, |r, c| prop[(sites[r], c)]);
        boson_p.push(permanent(&block)?.norm_sqr());
        patterns.push(ports);
    }
    let spin_other = (1.0 - spin_p.iter().sum::<f64>()).max(0.0);
    let boson_other = (1.0 - boson_p.iter().sum::<f64>()).max(0.0);
    let tvd = total_variation(&spin_p, &boson_p) + 0.5 * (spin_other - boson_other).abs();
    Ok(SpinSamplingResult {
        ports: m,
        excitations: n,
        time,
        coupling: delta,
        patterns,
        spin_probabilities: spin_p,
        boson_probabilities: boson_p,
        spin_other,
        boson_other,
        total_variation: tvd,
    })
}
