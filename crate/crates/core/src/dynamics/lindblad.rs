use std::sync::Arc;

use num_complex::Complex64;

use super::basis::{BasisSet, TruncatedBasis};
use super::operators::{lowering_matrix, number_weights};
use super::schrodinger::step_count;
use super::state::{Amplitude, SparseState};
use crate::effective::Lindbladian;
use crate::linalg::ComplexMatrix;
use crate::{Error, Result};

pub const DENSITY_HERMITICITY_TOLERANCE: f64 = 1e-12;
pub const DENSITY_TRACE_TOLERANCE: f64 = 1e-10;
pub const DENSITY_EIGENVALUE_FLOOR: f64 = -1e-8;
/// Largest `dt·Γ` accepted by [`evolve_lindblad`].
pub const MAX_STEP_RATE: f64 = 0.01;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Density matrix on the sectors `0..=N_max` of a qubit register.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    basis: Arc<TruncatedBasis>,
    rho: ComplexMatrix,
}

fn hermiticity(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl DensityMatrix {
    /// Checked constructor: Hermitian, unit trace and positive within the
    /// module tolerances.
    pub fn new(basis: Arc<TruncatedBasis>, rho: ComplexMatrix) -> Result<Self> {
        let d = Self::new_unchecked(basis, rho)?;
        let h = d.hermiticity_residual();
        if h > DENSITY_HERMITICITY_TOLERANCE {
            return Err(Error::Domain(format!("density matrix not Hermitian (residual {h:e})")));
        }
        let tr = d.trace();
        if (tr.re - 1.0).abs() > DENSITY_TRACE_TOLERANCE || tr.im.abs() > DENSITY_TRACE_TOLERANCE {
            return Err(Error::Domain(format!("density matrix trace is {tr}")));
        }
        let ev = d.min_eigenvalue();
        if ev < DENSITY_EIGENVALUE_FLOOR {
            return Err(Error::Domain(format!("density matrix has eigenvalue {ev:e}")));
        }
        Ok(d)
    }

    /// Only checks the shape. Used for generator images and trajectories.
    pub fn new_unchecked(basis: Arc<TruncatedBasis>, rho: ComplexMatrix) -> Result<Self> {
        if rho.shape() != (basis.len(), basis.len()) {
            return Err(Error::Shape(format!(
                "density matrix is {}x{}, basis has {} states",
                rho.nrows(),
                rho.ncols(),
                basis.len()
            )));
        }
        Ok(Self { basis, rho })
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩` for a sparse state inside the basis.
    pub fn from_pure<A: Amplitude>(basis: Arc<TruncatedBasis>, psi: &SparseState<A>) -> Result<Self> {
        if psi.sites() != basis.sites() {
            return Err(Error::Shape("state and basis have different registers".into()));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); basis.len()];
        for (m, a) in psi.iter() {
            let i = basis
                .index_of(m)
                .ok_or_else(|| Error::InvalidSector(format!("mask {m:#b} outside the truncated basis")))?;
            v[i] = a.to_complex();
        }
        let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if n2 == 0.0 {
            return Err(Error::Domain(
                "cannot build a density matrix from the zero vector".into(),
            ));
        }
        let v = nalgebra::DVector::from_vec(v);
        let rho = &v * v.adjoint() / Complex64::new(n2, 0.0);
        Self::new(basis, rho)
    }

    /// Projector onto one occupation mask.
    pub fn basis_projector(basis: Arc<TruncatedBasis>, mask: u128) -> Result<Self> {
        let sites = basis.sites();
        Self::from_pure(basis, &SparseState::from_entries(sites, [(mask, 1.0f64)]))
    }

    pub fn basis(&self) -> &Arc<TruncatedBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigen().eigenvalues.min()
    }

    /// Diagonal entries `⟨s|ρ|s⟩` in basis order.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.rho.nrows()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn population(&self, mask: u128) -> f64 {
        self.basis.index_of(mask).map_or(0.0, |i| self.rho[(i, i)].re)
    }

    /// `Tr(ρ n_s)` summed over all sites.
    pub fn excitation_number(&self) -> f64 {
        let w = number_weights(self.basis.as_ref(), &vec![1.0; self.basis.sites()]);
        w.iter().enumerate().map(|(i, x)| x * self.rho[(i, i)].re).sum()
    }
}

/// Dense matrix form of a [`Lindbladian`] on a truncated basis, written as
/// `L ρ = −i(H_c ρ − ρ H_c†) + Σ_k K_k ρ K_k†` with
/// `H_c = H − (i/2) Σ_k K_k† K_k`.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    basis: Arc<TruncatedBasis>,
    gamma: f64,
    h_c: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
}

impl LindbladGenerator {
    pub fn new(l: &Lindbladian, basis: Arc<TruncatedBasis>) -> Result<Self> {
        if basis.sites() != l.sites() {
            return Err(Error::Shape(format!(
                "generator on {} qubits, basis on {}",
                l.sites(),
                basis.sites()
            )));
        }
        let dim = basis.len();
        let lowering: Vec<ComplexMatrix> = (0..l.sites())
            .map(|s| lowering_matrix(basis.as_ref(), s).to_dense())
            .collect();
        let mut jumps = Vec::new();
        let mut h_c = l.hamiltonian.matrix(basis.as_ref()).to_dense();
        for jump in l.jump_operators()? {
            let mut k = ComplexMatrix::zeros(dim, dim);
            for (s, &c) in jump.coefficients.iter().enumerate() {
                if c != 0.0 {
                    k += &lowering[s] * Complex64::new(c * jump.weight.sqrt(), 0.0);
                }
            }
            h_c -= (k.adjoint() * &k) * (I * 0.5);
            jumps.push(k);
        }
        Ok(Self {
            basis,
            gamma: l.gamma,
            h_c,
            jumps,
        })
    }

    pub fn basis(&self) -> &Arc<TruncatedBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `L ρ` for any (not necessarily Hermitian) `ρ`.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = (&self.h_c * rho) * (-I) + (rho * self.h_c.adjoint()) * I;
        for k in &self.jumps {
            out += k * rho * k.adjoint();
        }
        out
    }

    /// `D²×D²` matrix acting on column-stacked `vec(ρ)`.
    pub fn superoperator(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut s = ComplexMatrix::zeros(d * d, d * d);
        let mut e = ComplexMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                e[(i, j)] = Complex64::new(1.0, 0.0);
                let image = self.apply(&e);
                s.column_mut(j * d + i).copy_from_slice(image.as_slice());
                e[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        s
    }
}

/// Diagnostics of a density-matrix integration.
#[derive(Debug, Clone)]
pub struct LindbladEvolution {
    pub state: DensityMatrix,
    pub steps: usize,
    /// Largest `|Tr ρ(t) − Tr ρ(0)|`.
    pub trace_drift: f64,
    /// Largest `max|ρ − ρ†|`.
    pub hermiticity_drift: f64,
    /// Largest single-step increase of the excitation number (0 if none).
    pub excitation_increase: f64,
}

/// Fixed-step RK4 for `dρ/dt = L ρ` with `dt·Γ ≤ 0.01`. `observe` sees the
/// initial state and the state after every step.
pub fn evolve_lindblad(
    generator: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_end: f64,
    dt: f64,
    mut observe: impl FnMut(f64, &DensityMatrix),
) -> Result<LindbladEvolution> {
    let steps = step_count(t_end, dt)?;
    if dt * generator.gamma > MAX_STEP_RATE * (1.0 + 1e-12) {
        return Err(Error::InvalidStep(format!(
            "dt·Γ = {} exceeds {MAX_STEP_RATE}",
            dt * generator.gamma
        )));
    }
    if rho0.basis.sites() != generator.basis.sites() || rho0.rho.nrows() != generator.dim() {
        return Err(Error::Shape(format!(
            "density matrix of dimension {} for a generator of dimension {}",
            rho0.rho.nrows(),
            generator.dim()
        )));
    }
    let weights = number_weights(generator.basis.as_ref(), &vec![1.0; generator.basis.sites()]);
    let excitations = |r: &ComplexMatrix| -> f64 { weights.iter().enumerate().map(|(i, w)| w * r[(i, i)].re).sum() };

    let mut rho = rho0.rho.clone();
    let tr0 = rho.trace();
    let mut trace_drift: f64 = 0.0;
    let mut herm_drift = hermiticity(&rho);
    let mut increase: f64 = 0.0;
    let mut n_prev = excitations(&rho);
    observe(0.0, rho0);
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    for k in 0..steps {
        let k1 = generator.apply(&rho);
        let k2 = generator.apply(&(&rho + &k1 * Complex64::new(h / 2.0, 0.0)));
        let k3 = generator.apply(&(&rho + &k2 * Complex64::new(h / 2.0, 0.0)));
        let k4 = generator.apply(&(&rho + &k3 * Complex64::new(h, 0.0)));
        rho += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0);

        trace_drift = trace_drift.max((rho.trace() - tr0).norm());
        herm_drift = herm_drift.max(hermiticity(&rho));
        let n = excitations(&rho);
        increase = increase.max(n - n_prev);
        n_prev = n;
        let snapshot = DensityMatrix {
            basis: generator.basis.clone(),
            rho: rho.clone(),
        };
        observe((k + 1) as f64 * h, &snapshot);
    }
    Ok(LindbladEvolution {
        state: DensityMatrix {
            basis: generator.basis.clone(),
            rho,
        },
        steps,
        trace_drift,
        hermiticity_drift: herm_drift,
        excitation_increase: increase,
    })
}
