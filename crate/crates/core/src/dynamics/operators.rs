use num_complex::Complex64;

use super::basis::BasisSet;
use crate::linalg::{ComplexMatrix, SparseMatrix};

/// Excitation-conserving two-site operator `Σ c·σ⁺_a σ⁻_b` on a qubit
/// register. A term with `a == b` is the number operator `c·n_a`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HoppingTerms {
    sites: usize,
    terms: Vec<(usize, usize, Complex64)>,
}

impl HoppingTerms {
    pub fn new(sites: usize) -> Self {
        Self {
            sites,
            terms: Vec::new(),
        }
    }

    /// Bipartite XY coupling `Σ J_mn σ⁺_out,m σ⁻_in,n + h.c.` on the
    /// standard `2M` register. Hermitian for any `J`.
    pub fn bipartite(ports: usize, j: &ComplexMatrix) -> Self {
        assert_eq!(j.shape(), (ports, ports), "coupling must be M×M");
        let mut h = Self::new(2 * ports);
        for m in 0..ports {
            for n in 0..ports {
                let c = j[(m, n)];
                if c != Complex64::new(0.0, 0.0) {
                    h.push_hermitian_pair(crate::output_site(ports, m), crate::input_site(n), c);
                }
            }
        }
        h
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn terms(&self) -> &[(usize, usize, Complex64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `c·σ⁺_a σ⁻_b`.
    pub fn push(&mut self, a: usize, b: usize, c: Complex64) {
        assert!(a < self.sites && b < self.sites, "site out of range");
        self.terms.push((a, b, c));
    }

    /// Adds `c·σ⁺_a σ⁻_b + c̄·σ⁺_b σ⁻_a`.
    pub fn push_hermitian_pair(&mut self, a: usize, b: usize, c: Complex64) {
        assert_ne!(a, b, "hermitian pair needs two distinct sites");
        self.push(a, b, c);
        self.push(b, a, c.conj());
    }

    pub fn push_number(&mut self, a: usize, c: f64) {
        self.push(a, a, Complex64::new(c, 0.0));
    }

    /// Matrix of the operator in `basis`, which must be closed under the
    /// terms (any fixed-excitation or truncated basis is).
    pub fn matrix<B: BasisSet + ?Sized>(&self, basis: &B) -> SparseMatrix {
        assert_eq!(basis.sites(), self.sites, "basis and operator sizes differ");
        // group by annihilated site
        let mut by_source: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); self.sites];
        for &(a, b, c) in &self.terms {
            by_source[b].push((a, c));
        }
        let mut trip = Vec::new();
        for (col, &s) in basis.states().iter().enumerate() {
            let mut occ = s;
            while occ != 0 {
                let b = occ.trailing_zeros() as usize;
                occ &= occ - 1;
                let lowered = s & !(1u128 << b);
                for &(a, c) in &by_source[b] {
                    if a != b && lowered >> a & 1 == 1 {
                        continue;
                    }
                    let target = lowered | (1u128 << a);
                    let row = basis.index_of(target).expect("hopping target outside basis");
                    trip.push((row, col, c));
                }
            }
        }
        SparseMatrix::from_triplets(basis.len(), basis.len(), trip)
    }
}

/// Diagonal operator `Σ_s w_s n_s` as a vector over `basis`.
pub fn number_weights<B: BasisSet + ?Sized>(basis: &B, weights: &[f64]) -> Vec<f64> {
    assert_eq!(weights.len(), basis.sites());
    basis
        .states()
        .iter()
        .map(|&s| {
            let mut occ = s;
            let mut acc = 0.0;
            while occ != 0 {
                acc += weights[occ.trailing_zeros() as usize];
                occ &= occ - 1;
            }
            acc
        })
        .collect()
}

/// `σ⁻_site` within a basis closed under lowering.
pub fn lowering_matrix<B: BasisSet + ?Sized>(basis: &B, site: usize) -> SparseMatrix {
    let mut trip = Vec::new();
    for (col, &s) in basis.states().iter().enumerate() {
        if s >> site & 1 == 1 {
            let row = basis
                .index_of(s & !(1u128 << site))
                .expect("basis not closed under lowering");
            trip.push((row, col, Complex64::new(1.0, 0.0)));
        }
    }
    SparseMatrix::from_triplets(basis.len(), basis.len(), trip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::basis::{SectorBasis, TruncatedBasis};

    #[test]
    fn hop_moves_one_excitation() {
        let basis = SectorBasis::new(3, 1).unwrap();
        let mut h = HoppingTerms::new(3);
        h.push(2, 0, Complex64::new(0.5, 0.0));
        let m = h.matrix(&basis).to_dense();
        // |001> (site 0) → |100> (site 2)
        assert_eq!(m[(2, 0)], Complex64::new(0.5, 0.0));
        assert_eq!(m.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn hard_core_blocks_double_occupancy() {
        let basis = SectorBasis::new(2, 2).unwrap();
        let mut h = HoppingTerms::new(2);
        h.push_hermitian_pair(0, 1, Complex64::new(1.0, 0.0));
        assert_eq!(h.matrix(&basis).nnz(), 0);
    }

    #[test]
    fn number_terms_are_diagonal() {
        let basis = SectorBasis::new(3, 2).unwrap();
        let mut h = HoppingTerms::new(3);
        h.push_number(1, 2.0);
        let m = h.matrix(&basis).to_dense();
        let w = number_weights(&basis, &[0.0, 2.0, 0.0]);
        for i in 0..basis.len() {
            assert_eq!(m[(i, i)].re, w[i]);
        }
    }

    #[test]
    fn bipartite_is_hermitian_for_asymmetric_couplings() {
        let j = ComplexMatrix::from_fn(3, 3, |m, n| Complex64::new((m * 3 + n) as f64 - 4.0, 0.0));
        let h = HoppingTerms::bipartite(3, &j);
        let basis = SectorBasis::new(6, 2).unwrap();
        assert_eq!(h.matrix(&basis).hermiticity_residual(), 0.0);
    }

    #[test]
    fn lowering_adjoint_is_raising() {
        let t = TruncatedBasis::new(3, 2).unwrap();
        let l = lowering_matrix(&t, 1).to_dense();
        let n = &l.adjoint() * &l;
        let w = number_weights(&t, &[0.0, 1.0, 0.0]);
        for i in 0..t.len() {
            assert_eq!(n[(i, i)].re, w[i]);
        }
    }
}
