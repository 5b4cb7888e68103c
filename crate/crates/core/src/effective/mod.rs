//! Effective qubit models of a circuit: the coherent XY Hamiltonian of a
//! resonator-mediated interaction and the collective Lindblad generator of
//! an open waveguide circuit.
//!
//! Rates and frequencies are plain numbers; callers pick the unit (`Γ` for
//! dissipative models, the dominant `g²/(Δ−ω)` for resonator models).
//!
//! # Normalization of the dissipator
//!
//! [`build_lindbladian`] uses the local-plus-cross jump structure, with
//! rate `Γ` on every qubit. For a real orthogonal circuit `O` the same
//! generator can be written with the collective operators of
//! [`collective_ops`] as `2Γ Σ_m D[S⁻_m]`, where
//! `S⁻_m = (σ⁻_in,m + Σ_n O_nm σ⁻_out,n)/√2`. [`COLLECTIVE_SCALE`] records
//! that factor; it is checked by comparing superoperator matrices.

mod couplings;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub use couplings::{resonator_couplings, unitary_from_couplings, CouplingConfig, ResonatorMode, SYMMETRY_TOLERANCE};

use crate::dynamics::{lowering_matrix, BasisSet, HoppingTerms, SectorBasis, SectorOperator, SparseState};
use crate::linalg::{complexify, OrthogonalMatrix, RealMatrix, SparseMatrix, UnitaryMatrix};
use crate::{input_site, output_site, Error, Result};

/// Full generator = `COLLECTIVE_SCALE · Γ Σ_m D[S⁻_m]` for orthogonal circuits.
pub const COLLECTIVE_SCALE: f64 = 2.0;

/// Bipartite XY model `Σ (Δ̃/2)σ^z + Σ J_mn (σ⁺_out,m σ⁻_in,n + h.c.)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinHamiltonian {
    pub ports: usize,
    pub delta_tilde: f64,
    /// Row `m` couples output qubit `m`, column `n` input qubit `n`.
    #[serde(with = "real_matrix_json")]
    pub j: RealMatrix,
}

mod real_matrix_json {
    use super::RealMatrix;
    use crate::linalg::MatrixJson;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &RealMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from_real(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RealMatrix, D::Error> {
        MatrixJson::deserialize(d)?.to_real().map_err(serde::de::Error::custom)
    }
}

impl SpinHamiltonian {
    pub fn new(delta_tilde: f64, j: RealMatrix) -> Result<Self> {
        if !j.is_square() {
            return Err(Error::Shape(format!(
                "J must be square, got {}x{}",
                j.nrows(),
                j.ncols()
            )));
        }
        if !delta_tilde.is_finite() || j.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("spin Hamiltonian parameters must be finite".into()));
        }
        Ok(Self {
            ports: j.nrows(),
            delta_tilde,
            j,
        })
    }

    /// The flip-flop part as hopping terms on the `2M` register.
    pub fn hopping_terms(&self) -> HoppingTerms {
        HoppingTerms::bipartite(self.ports, &complexify(&self.j))
    }
}

/// The spin Hamiltonian restricted to the `excitations` sector. The `σ^z`
/// term is the constant `Δ̃(N − M)` there.
pub fn build_spin_hamiltonian(h: &SpinHamiltonian, excitations: usize) -> Result<SectorOperator> {
    let sites = 2 * h.ports;
    if excitations > sites {
        return Err(Error::InvalidSector(format!(
            "{excitations} excitations exceed {sites} qubits"
        )));
    }
    let basis = Arc::new(SectorBasis::new(sites, excitations)?);
    let mut op = SectorOperator::from_terms(&h.hopping_terms(), basis.clone());
    let offset = h.delta_tilde * (excitations as f64 - h.ports as f64);
    if offset != 0.0 {
        op.matrix = op.matrix.add(&SparseMatrix::from_diagonal(&vec![offset; basis.len()]));
    }
    Ok(op)
}

/// Lindblad generator in Kossakowski form over the `2M` lowering operators:
///
/// `dρ/dt = −i[H, ρ] + Σ_ab G_ab (σ⁻_a ρ σ⁺_b − ½{σ⁺_b σ⁻_a, ρ})`.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    pub ports: usize,
    pub gamma: f64,
    pub hamiltonian: HoppingTerms,
    /// Real symmetric positive semidefinite `G`.
    pub rates: RealMatrix,
}

/// A jump operator `√w · Σ_s c_s σ⁻_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub weight: f64,
    pub coefficients: Vec<f64>,
}

impl Lindbladian {
    pub fn sites(&self) -> usize {
        2 * self.ports
    }

    /// Diagonal form of the rate matrix. Fails if `G` has a clearly
    /// negative eigenvalue.
    pub fn jump_operators(&self) -> Result<Vec<JumpOperator>> {
        let eig = SymmetricEigen::new(self.rates.clone());
        let floor = -1e-12 * self.rates.amax().max(1.0);
        let mut jumps = Vec::new();
        for (k, &w) in eig.eigenvalues.iter().enumerate() {
            if w < floor {
                return Err(Error::Domain(format!("rate matrix has negative eigenvalue {w}")));
            }
            if w > 0.0 {
                jumps.push(JumpOperator {
                    weight: w,
                    coefficients: eig.eigenvectors.column(k).iter().copied().collect(),
                });
            }
        }
        Ok(jumps)
    }
}

/// Generator of an open circuit with resonant unitary `U` and rate `Γ`:
/// `H = Γ Σ Im U_mn σ⁺_out,m σ⁻_in,n + h.c.`, `G_ss = Γ` on every qubit and
/// `G_{out n, in m} = G_{in m, out n} = Γ Re U_nm`.
pub fn build_lindbladian(u: &UnitaryMatrix, gamma: f64) -> Result<Lindbladian> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("rate must be positive, got {gamma}")));
    }
    let m = u.dim();
    let hamiltonian = HoppingTerms::bipartite(m, &complexify(&(u.imag_part() * gamma)));
    let re = u.real_part();
    let mut rates = RealMatrix::identity(2 * m, 2 * m) * gamma;
    for n in 0..m {
        for k in 0..m {
            let g = gamma * re[(n, k)];
            rates[(output_site(m, n), input_site(k))] = g;
            rates[(input_site(k), output_site(m, n))] = g;
        }
    }
    Ok(Lindbladian {
        ports: m,
        gamma,
        hamiltonian,
        rates,
    })
}

/// `Γ Σ_m D[S⁻_m]` for the given collective operators.
pub fn collective_lindbladian(ops: &CollectiveOperatorSet, gamma: f64) -> Result<Lindbladian> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("rate must be positive, got {gamma}")));
    }
    let c = &ops.coefficients;
    Ok(Lindbladian {
        ports: ops.ports,
        gamma,
        hamiltonian: HoppingTerms::new(2 * ops.ports),
        rates: c * c.transpose() * gamma,
    })
}

/// Collective operators `S⁺_m = (σ⁺_in,m + Σ_n O_nm σ⁺_out,n)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveOperatorSet {
    pub ports: usize,
    /// Column `m` holds the site coefficients of `S⁺_m`.
    pub coefficients: RealMatrix,
}

pub fn collective_ops(o: &OrthogonalMatrix) -> CollectiveOperatorSet {
    let m = o.dim();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut c = RealMatrix::zeros(2 * m, m);
    for k in 0..m {
        c[(input_site(k), k)] = r;
        for n in 0..m {
            c[(output_site(m, n), k)] = o.get(n, k) * r;
        }
    }
    CollectiveOperatorSet {
        ports: m,
        coefficients: c,
    }
}

impl CollectiveOperatorSet {
    /// Nonzero `(site, coefficient)` pairs of `S^±_m`.
    pub fn site_coefficients(&self, m: usize) -> Vec<(usize, f64)> {
        self.coefficients
            .column(m)
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(s, &c)| (s, c))
            .collect()
    }

    pub fn raise(&self, m: usize, state: &SparseState<f64>) -> SparseState<f64> {
        state.raise(&self.site_coefficients(m))
    }

    pub fn lower(&self, m: usize, state: &SparseState<f64>) -> SparseState<f64> {
        state.lower(&self.site_coefficients(m))
    }

    /// `S⁻_m` in a basis closed under lowering.
    pub fn lowering_matrix<B: BasisSet + ?Sized>(&self, m: usize, basis: &B) -> SparseMatrix {
        self.site_coefficients(m)
            .into_iter()
            .fold(SparseMatrix::zeros(basis.len(), basis.len()), |acc, (s, c)| {
                acc.add(&lowering_matrix(basis, s).scale(Complex64::new(c, 0.0)))
            })
    }
}
