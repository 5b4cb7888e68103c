use std::sync::Arc;

use num_complex::Complex64;
use rustc_hash::FxHashMap;

use crate::dynamics::{binomial, MAX_BASIS_SIZE};
use crate::linalg::{permanent, ComplexMatrix, SparseMatrix, UnitaryMatrix};
use crate::{Error, Result};

/// Occupation lists of `modes` bosonic modes holding `excitations` quanta,
/// at most `cutoff` per mode, in descending lexicographic order (all quanta
/// in mode 0 first).
#[derive(Debug, Clone)]
pub struct FockBasis {
    modes: usize,
    excitations: usize,
    cutoff: usize,
    states: Vec<Vec<u8>>,
    index: FxHashMap<Vec<u8>, usize>,
}

impl FockBasis {
    pub fn new(modes: usize, excitations: usize, cutoff: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidDimension("Fock basis needs at least one mode".into()));
        }
        if cutoff > u8::MAX as usize {
            return Err(Error::SizeLimit(format!("cutoff {cutoff} exceeds {}", u8::MAX)));
        }
        // the unrestricted count bounds the restricted one
        let bound = binomial(modes + excitations - 1, excitations).unwrap_or(u128::MAX);
        if bound > MAX_BASIS_SIZE as u128 {
            return Err(Error::SizeLimit(format!(
                "{excitations} bosons in {modes} modes exceed {MAX_BASIS_SIZE} states"
            )));
        }
        let mut states = Vec::new();
        let mut current = vec![0u8; modes];
        fill(&mut states, &mut current, 0, excitations, cutoff);
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Self {
            modes,
            excitations,
            cutoff,
            states,
            index,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn excitations(&self) -> usize {
        self.excitations
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Matrix of `Σ c · a†_p a_q` (`p == q` gives `c · a†_p a_p`).
    pub fn hopping_matrix(&self, terms: &[(usize, usize, Complex64)]) -> SparseMatrix {
        let mut trip = Vec::new();
        let mut scratch = vec![0u8; self.modes];
        for (col, s) in self.states.iter().enumerate() {
            for &(p, q, c) in terms {
                if s[q] == 0 {
                    continue;
                }
                scratch.copy_from_slice(s);
                let mut amp = (scratch[q] as f64).sqrt();
                scratch[q] -= 1;
                scratch[p] += 1;
                amp *= (scratch[p] as f64).sqrt();
                if let Some(row) = self.index_of(&scratch) {
                    trip.push((row, col, c * amp));
                }
            }
        }
        SparseMatrix::from_triplets(self.len(), self.len(), trip)
    }

    /// `Σ_p w_p n_p` as a diagonal.
    pub fn number_weights(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.modes);
        self.states
            .iter()
            .map(|s| s.iter().zip(weights).map(|(&n, w)| n as f64 * w).sum())
            .collect()
    }
}

fn fill(out: &mut Vec<Vec<u8>>, current: &mut [u8], mode: usize, remaining: usize, cutoff: usize) {
    if mode + 1 == current.len() {
        if remaining <= cutoff {
            current[mode] = remaining as u8;
            out.push(current.to_vec());
            current[mode] = 0;
        }
        return;
    }
    for n in (0..=remaining.min(cutoff)).rev() {
        current[mode] = n as u8;
        fill(out, current, mode + 1, remaining - n, cutoff);
    }
    current[mode] = 0;
}

/// Amplitudes over a [`FockBasis`].
#[derive(Debug, Clone)]
pub struct BosonSamplingState {
    pub basis: Arc<FockBasis>,
    pub amplitudes: Vec<Complex64>,
}

impl BosonSamplingState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn amplitude(&self, occupation: &[u8]) -> Complex64 {
        self.basis
            .index_of(occupation)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.basis.modes() != other.basis.modes() || self.basis.excitations() != other.basis.excitations() {
            return Err(Error::Shape("Fock states live in different spaces".into()));
        }
        Ok(self
            .basis
            .states()
            .iter()
            .zip(&self.amplitudes)
            .map(|(s, a)| a.conj() * other.amplitude(s))
            .sum())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `Π_{n<N} (Σ_m U_mn a†_m)|0⟩`: the amplitude of pattern `S` is
/// `Per(U_S)/√(Π_m s_m!)`, with row `m` of the first `N` columns repeated
/// `s_m` times.
pub fn bs_state(u: &UnitaryMatrix, n: usize) -> Result<BosonSamplingState> {
    let m = u.dim();
    if n > m {
        return Err(Error::InvalidFilling {
            excitations: n,
            ports: m,
        });
    }
    let basis = Arc::new(FockBasis::new(m, n, n)?);
    let mut amplitudes = Vec::with_capacity(basis.len());
    for s in basis.states() {
        let rows: Vec<usize> = s
            .iter()
            .enumerate()
            .flat_map(|(mode, &k)| std::iter::repeat_n(mode, k as usize))
            .collect();
        let sub = ComplexMatrix::from_fn(n, n, |r, c| u.get(rows[r], c));
        let norm: f64 = s.iter().map(|&k| factorial(k as usize)).product();
        amplitudes.push(permanent(&sub)? / norm.sqrt());
    }
    Ok(BosonSamplingState { basis, amplitudes })
}
