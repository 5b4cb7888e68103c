use std::ops::{AddAssign, Mul};
use std::sync::Arc;

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use serde::Serialize;

use super::basis::{BasisSet, SectorBasis};
use super::operators::HoppingTerms;
use crate::linalg::SparseMatrix;
use crate::{Error, Result};

/// Dense amplitude vector over one excitation sector.
#[derive(Debug, Clone)]
pub struct SectorState {
    basis: Arc<SectorBasis>,
    amplitudes: Vec<Complex64>,
}

impl SectorState {
    pub fn new(basis: Arc<SectorBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::Shape(format!(
                "{} amplitudes for a basis of {} states",
                amplitudes.len(),
                basis.len()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("non-finite amplitude".into()));
        }
        Ok(Self { basis, amplitudes })
    }

    /// The basis state with the given occupation mask.
    pub fn basis_state(basis: Arc<SectorBasis>, mask: u128) -> Result<Self> {
        let idx = basis
            .index_of(mask)
            .ok_or_else(|| Error::InvalidSector(format!("mask {mask:#b} is not in the sector")))?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.len()];
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, mask: u128) -> Complex64 {
        self.basis
            .index_of(mask)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Domain("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.iter().map(|z| z / n).collect(),
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.basis.sites() != other.basis.sites() || self.basis.excitations() != other.basis.excitations() {
            return Err(Error::Shape(format!(
                "states live in different sectors ({} sites/{} exc vs {} sites/{} exc)",
                self.basis.sites(),
                self.basis.excitations(),
                other.basis.sites(),
                other.basis.excitations()
            )));
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_compatible(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|² / (‖self‖²‖other‖²)`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let ov = self.inner(other)?.norm_sqr();
        Ok(ov / (self.norm().powi(2) * other.norm().powi(2)))
    }

    /// Expectation of a diagonal number-weighted observable.
    pub fn expectation_diagonal(&self, diag: &[f64]) -> f64 {
        self.amplitudes.iter().zip(diag).map(|(z, d)| z.norm_sqr() * d).sum()
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump {
            sites: self.basis.sites(),
            excitations: self.basis.excitations(),
            entries: self
                .basis
                .states()
                .iter()
                .zip(&self.amplitudes)
                .filter(|(_, z)| z.norm_sqr() > 0.0)
                .map(|(&m, z)| (occupied_sites(m), [z.re, z.im]))
                .collect(),
        }
    }
}

/// Serializable amplitude listing: occupied sites with `[re, im]`.
#[derive(Debug, Clone, Serialize)]
pub struct StateDump {
    pub sites: usize,
    pub excitations: usize,
    pub entries: Vec<(Vec<usize>, [f64; 2])>,
}

pub fn occupied_sites(mut mask: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

/// An operator restricted to one excitation sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub basis: Arc<SectorBasis>,
    pub matrix: SparseMatrix,
}

impl SectorOperator {
    pub fn from_terms(terms: &HoppingTerms, basis: Arc<SectorBasis>) -> Self {
        let matrix = terms.matrix(basis.as_ref());
        Self { basis, matrix }
    }
}

/// Scalar types usable as sparse-state amplitudes.
pub trait Amplitude: Copy + Send + Sync + PartialEq + AddAssign + Mul<Output = Self> + std::fmt::Debug {
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn norm_sqr(self) -> f64;
    fn conj(self) -> Self;
    fn to_complex(self) -> Complex64;
}

impl Amplitude for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Amplitude for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Hash-map state used when only a small part of a sector is populated.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState<A> {
    sites: usize,
    amps: FxHashMap<u128, A>,
}

impl<A: Amplitude> SparseState<A> {
    pub fn vacuum(sites: usize) -> Self {
        let mut amps = FxHashMap::default();
        amps.insert(0, A::from_f64(1.0));
        Self { sites, amps }
    }

    pub fn from_entries(sites: usize, entries: impl IntoIterator<Item = (u128, A)>) -> Self {
        let mut amps: FxHashMap<u128, A> = FxHashMap::default();
        for (m, a) in entries {
            *amps.entry(m).or_insert_with(A::zero) += a;
        }
        Self { sites, amps }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn get(&self, mask: u128) -> A {
        self.amps.get(&mask).copied().unwrap_or_else(A::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u128, A)> + '_ {
        self.amps.iter().map(|(&m, &a)| (m, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `(Σ c_s σ⁺_s)|self⟩` with hard-core truncation.
    pub fn raise(&self, coeffs: &[(usize, A)]) -> Self {
        let mut out: FxHashMap<u128, A> =
            FxHashMap::with_capacity_and_hasher(self.amps.len() * coeffs.len(), Default::default());
        for (&m, &a) in &self.amps {
            for &(s, c) in coeffs {
                let bit = 1u128 << s;
                if m & bit == 0 {
                    *out.entry(m | bit).or_insert_with(A::zero) += c * a;
                }
            }
        }
        Self {
            sites: self.sites,
            amps: out,
        }
    }

    /// `(Σ c_s σ⁻_s)|self⟩`.
    pub fn lower(&self, coeffs: &[(usize, A)]) -> Self {
        let mut out: FxHashMap<u128, A> = FxHashMap::default();
        for (&m, &a) in &self.amps {
            for &(s, c) in coeffs {
                let bit = 1u128 << s;
                if m & bit != 0 {
                    *out.entry(m & !bit).or_insert_with(A::zero) += c * a;
                }
            }
        }
        Self {
            sites: self.sites,
            amps: out,
        }
    }

    /// Drops entries with `|a|² ≤ eps`.
    pub fn prune(&mut self, eps: f64) {
        self.amps.retain(|_, a| a.norm_sqr() > eps);
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        let (small, large, flip) = if self.amps.len() <= other.amps.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (&m, &a) in &small.amps {
            if let Some(&b) = large.amps.get(&m) {
                let t = a.conj().to_complex() * b.to_complex();
                acc += if flip { t.conj() } else { t };
            }
        }
        acc
    }

    /// Dense copy in `basis`; fails if an entry lies outside the basis.
    pub fn to_sector_state(&self, basis: Arc<SectorBasis>) -> Result<SectorState> {
        let mut v = vec![Complex64::new(0.0, 0.0); basis.len()];
        for (&m, &a) in &self.amps {
            let i = basis
                .index_of(m)
                .ok_or_else(|| Error::InvalidSector(format!("mask {m:#b} is not in the target sector")))?;
            v[i] = a.to_complex();
        }
        SectorState::new(basis, v)
    }
}
