use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fock::{bs_state, BosonSamplingState, FockBasis};
use crate::dynamics::{
    evolve_schrodinger, mask_of, BasisSet, HoppingTerms, Integrator, ParametricHamiltonian, SectorBasis, SectorState,
    StateDump,
};
use crate::linalg::{permanent, ComplexMatrix, SparseMatrix, UnitaryMatrix};
use crate::{input_site, output_site, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepProfile {
    /// `λ = 1 − (3s² − 2s³)` with `s = t/T`.
    #[default]
    Smoothstep,
}

impl std::str::FromStr for SweepProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoothstep" => Ok(Self::Smoothstep),
            other => Err(Error::Domain(format!("unknown sweep schedule `{other}`"))),
        }
    }
}

/// Detuning sweep. `epsilon` is in units of the coupling `δ`, `total_time`
/// and `dt` in units of `1/δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub epsilon: f64,
    pub total_time: f64,
    #[serde(default)]
    pub profile: SweepProfile,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    0.05
}

impl Default for SweepSchedule {
    fn default() -> Self {
        Self {
            epsilon: 10.0,
            total_time: 100.0,
            profile: SweepProfile::Smoothstep,
            dt: default_dt(),
        }
    }
}

impl SweepSchedule {
    pub fn new(epsilon: f64, total_time: f64) -> Result<Self> {
        let s = Self {
            epsilon,
            total_time,
            ..Self::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be finite, got {}", self.epsilon)));
        }
        if !(self.total_time > 0.0) || !self.total_time.is_finite() {
            return Err(Error::Domain(format!(
                "sweep time must be positive, got {}",
                self.total_time
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidStep(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    /// `λ(t)` for `t` in units of `1/δ`; clamped outside `[0, T]`.
    pub fn lambda(&self, t: f64) -> f64 {
        let s = (t / self.total_time).clamp(0.0, 1.0);
        match self.profile {
            SweepProfile::Smoothstep => 1.0 - s * s * (3.0 - 2.0 * s),
        }
    }
}

fn check_coupling(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("coupling must be positive, got {delta}")));
    }
    Ok(())
}

fn check_filling(u: &UnitaryMatrix, n: usize) -> Result<()> {
    if n == 0 || n > u.dim() {
        return Err(Error::InvalidFilling {
            excitations: n,
            ports: u.dim(),
        });
    }
    Ok(())
}

fn warn_weak_detuning(sched: &SweepSchedule) {
    if sched.epsilon.abs() < 5.0 {
        log::warn!(
            "epsilon = {}δ is not large against the coupling; transfer may be poor",
            sched.epsilon
        );
    }
}

/// `Π_{n<N} Σ_m U_mn σ⁺_out,m |0⟩` on the `2M` register, with collision
/// terms dropped. Returned unnormalized together with its norm.
pub fn hardcore_bs_state(u: &UnitaryMatrix, n: usize) -> Result<(SectorState, f64)> {
    let m = u.dim();
    if n > m {
        return Err(Error::InvalidFilling {
            excitations: n,
            ports: m,
        });
    }
    let basis = Arc::new(SectorBasis::new(2 * m, n)?);
    let mut amplitudes = vec![ZERO; basis.len()];
    let outputs = SectorBasis::new(m, n)?;
    for &pattern in outputs.states() {
        let rows = crate::dynamics::occupied_sites(pattern);
        let sub = ComplexMatrix::from_fn(n, n, |r, c| u.get(rows[r], c));
        let sites: Vec<usize> = rows.iter().map(|&p| output_site(m, p)).collect();
        let idx = basis.index_of(mask_of(&sites)).expect("output pattern in sector");
        amplitudes[idx] = permanent(&sub)?;
    }
    let state = SectorState::new(basis, amplitudes)?;
    let norm = state.norm();
    Ok((state, norm))
}

fn spin_hamiltonian_parts(u: &UnitaryMatrix, basis: &SectorBasis, delta: f64) -> (SparseMatrix, Vec<f64>, Vec<f64>) {
    let m = u.dim();
    let j = u.as_matrix() * Complex64::new(delta, 0.0);
    let hop = HoppingTerms::bipartite(m, &j).matrix(basis);
    // σ^z summed over one side is 2·n_side − M
    let side = |site: &dyn Fn(usize) -> usize| -> Vec<f64> {
        let mask = mask_of(&(0..m).map(site).collect::<Vec<_>>());
        basis
            .states()
            .iter()
            .map(|&s| 2.0 * (s & mask).count_ones() as f64 - m as f64)
            .collect()
    };
    let z_in = side(&input_site);
    let z_out = side(&|p| output_site(m, p));
    (hop, z_out, z_in)
}

fn boson_hamiltonian_parts(u: &UnitaryMatrix, basis: &FockBasis, delta: f64) -> (SparseMatrix, Vec<f64>, Vec<f64>) {
    let m = u.dim();
    let mut terms = Vec::with_capacity(2 * m * m);
    for a in 0..m {
        for b in 0..m {
            let c = u.get(a, b) * delta;
            if c != ZERO {
                terms.push((output_site(m, a), input_site(b), c));
                terms.push((input_site(b), output_site(m, a), c.conj()));
            }
        }
    }
    let hop = basis.hopping_matrix(&terms);
    // 2·a†a − 1 per mode, matching σ^z on singly occupied modes
    let weights = |outputs: bool| -> Vec<f64> {
        let w: Vec<f64> = (0..2 * m)
            .map(|s| if (s >= m) == outputs { 2.0 } else { 0.0 })
            .collect();
        basis.number_weights(&w).into_iter().map(|x| x - m as f64).collect()
    };
    (hop, weights(true), weights(false))
}

fn assemble(
    hop: SparseMatrix,
    z_out: Vec<f64>,
    z_in: Vec<f64>,
    epsilon: f64,
    lambda: impl Fn(f64) -> f64 + Clone + Send + Sync + 'static,
) -> ParametricHamiltonian {
    let dim = hop.nrows();
    let l_out = lambda.clone();
    ParametricHamiltonian::new(dim)
        .with_part(hop, |_| 1.0)
        .with_part(SparseMatrix::from_diagonal(&z_out), move |t| epsilon * (1.0 - l_out(t)))
        .with_part(SparseMatrix::from_diagonal(&z_in), move |t| epsilon * lambda(t))
}

/// `Σ J_mn(σ⁺_out,m σ⁻_in,n + h.c.) + ε Σ_m [(1−λ)σ^z_out,m + λσ^z_in,m]`
/// with `J = δ·U` on the `N`-excitation sector. `epsilon` is absolute and
/// `lambda` takes absolute time.
pub fn spin_sweep_hamiltonian(
    u: &UnitaryMatrix,
    n: usize,
    epsilon: f64,
    delta: f64,
    lambda: impl Fn(f64) -> f64 + Clone + Send + Sync + 'static,
) -> Result<(Arc<SectorBasis>, ParametricHamiltonian)> {
    check_filling(u, n)?;
    let basis = Arc::new(SectorBasis::new(2 * u.dim(), n)?);
    let (hop, z_out, z_in) = spin_hamiltonian_parts(u, &basis, delta);
    Ok((basis, assemble(hop, z_out, z_in, epsilon, lambda)))
}

/// The bosonic counterpart of [`spin_sweep_hamiltonian`] with `σ^z → 2a†a − 1`,
/// on Fock states of `2M` modes (inputs first) with per-mode `cutoff`.
pub fn boson_sweep_hamiltonian(
    u: &UnitaryMatrix,
    n: usize,
    cutoff: usize,
    epsilon: f64,
    delta: f64,
    lambda: impl Fn(f64) -> f64 + Clone + Send + Sync + 'static,
) -> Result<(Arc<FockBasis>, ParametricHamiltonian)> {
    check_filling(u, n)?;
    if cutoff < n {
        return Err(Error::Truncation { cutoff, excitations: n });
    }
    let basis = Arc::new(FockBasis::new(2 * u.dim(), n, cutoff)?);
    let (hop, z_out, z_in) = boson_hamiltonian_parts(u, &basis, delta);
    Ok((basis, assemble(hop, z_out, z_in, epsilon, lambda)))
}

#[derive(Debug, Clone)]
pub struct SpinSweep {
    pub state: SectorState,
    /// Against the normalized hard-core target.
    pub fidelity: f64,
    pub target_norm: f64,
    pub norm_drift: f64,
}

#[derive(Debug, Clone)]
pub struct BosonSweep {
    pub state: BosonSamplingState,
    /// `|⟨φ_BS|φ(T)⟩|²` with the target on the output modes.
    pub fidelity: f64,
    pub norm_drift: f64,
}

fn absolute_lambda(sched: SweepSchedule, delta: f64) -> impl Fn(f64) -> f64 + Clone + Send + Sync + 'static {
    move |t| sched.lambda(t * delta)
}

/// Spin sweep from inputs `0..N`. Any unitary is accepted; the protocol is
/// designed for real orthogonal couplings.
pub fn adiabatic_sweep_spin(u: &UnitaryMatrix, n: usize, sched: &SweepSchedule, delta: f64) -> Result<SpinSweep> {
    sched.validate()?;
    check_coupling(delta)?;
    warn_weak_detuning(sched);
    let (basis, h) = spin_sweep_hamiltonian(u, n, sched.epsilon * delta, delta, absolute_lambda(*sched, delta))?;
    let start = SectorState::basis_state(basis.clone(), mask_of(&(0..n).map(input_site).collect::<Vec<_>>()))?;
    let ev = evolve_schrodinger(
        &h,
        start.amplitudes(),
        sched.total_time / delta,
        sched.dt / delta,
        Integrator::Magnus4,
        |_, _| {},
    )?;
    let state = SectorState::new(basis, ev.state)?;
    let (target, target_norm) = hardcore_bs_state(u, n)?;
    let fidelity = if target_norm > 0.0 {
        state.fidelity(&target)?
    } else {
        0.0
    };
    Ok(SpinSweep {
        state,
        fidelity,
        target_norm,
        norm_drift: ev.norm_drift,
    })
}

/// Boson sweep from `Π_{m<N} a†_in,m|0⟩` with per-mode occupancy ≤ `cutoff`.
pub fn adiabatic_sweep_boson(
    u: &UnitaryMatrix,
    n: usize,
    cutoff: usize,
    sched: &SweepSchedule,
    delta: f64,
) -> Result<BosonSweep> {
    sched.validate()?;
    check_coupling(delta)?;
    warn_weak_detuning(sched);
    let (basis, h) = boson_sweep_hamiltonian(
        u,
        n,
        cutoff,
        sched.epsilon * delta,
        delta,
        absolute_lambda(*sched, delta),
    )?;
    let m = u.dim();
    let mut occ = vec![0u8; 2 * m];
    occ[..n].fill(1);
    let mut psi0 = vec![ZERO; basis.len()];
    psi0[basis.index_of(&occ).expect("initial pattern in basis")] = Complex64::new(1.0, 0.0);
    let ev = evolve_schrodinger(
        &h,
        &psi0,
        sched.total_time / delta,
        sched.dt / delta,
        Integrator::Magnus4,
        |_, _| {},
    )?;
    let state = BosonSamplingState {
        basis,
        amplitudes: ev.state,
    };
    let target = bs_state(u, n)?;
    let overlap: Complex64 = target
        .basis
        .states()
        .iter()
        .zip(&target.amplitudes)
        .map(|(s, a)| {
            let mut full = vec![0u8; m];
            full.extend_from_slice(s);
            a.conj() * state.amplitude(&full)
        })
        .sum();
    Ok(BosonSweep {
        fidelity: overlap.norm_sqr() / state.norm().powi(2),
        state,
        norm_drift: ev.norm_drift,
    })
}

/// Restricts a Fock state to at most one quantum per mode, read as a qubit
/// register with mode `k` on site `k`. Returns the projection and the
/// weight `‖P ψ‖²` it keeps.
pub fn project_hardcore(state: &BosonSamplingState) -> Result<(SectorState, f64)> {
    let basis = Arc::new(SectorBasis::new(state.basis.modes(), state.basis.excitations())?);
    let mut amplitudes = vec![ZERO; basis.len()];
    let mut weight = 0.0;
    for (occ, a) in state.basis.states().iter().zip(&state.amplitudes) {
        if occ.iter().all(|&k| k <= 1) {
            let sites: Vec<usize> = (0..occ.len()).filter(|&k| occ[k] == 1).collect();
            let idx = basis
                .index_of(mask_of(&sites))
                .expect("single-occupancy pattern in sector");
            amplitudes[idx] = *a;
            weight += a.norm_sqr();
        }
    }
    Ok((SectorState::new(basis, amplitudes)?, weight))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDistance {
    /// `min_φ ‖a − e^{iφ} b‖`.
    pub distance: f64,
    /// `⟨a|b⟩`.
    pub overlap: Complex64,
}

pub fn state_distance(a: &SectorState, b: &SectorState) -> Result<StateDistance> {
    let overlap = a.inner(b)?;
    let d2 = a.norm().powi(2) + b.norm().powi(2) - 2.0 * overlap.norm();
    Ok(StateDistance {
        distance: d2.max(0.0).sqrt(),
        overlap,
    })
}

/// One point of the adiabatic preparation experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    #[serde(rename = "M")]
    pub ports: usize,
    #[serde(rename = "N")]
    pub excitations: usize,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub epsilon: f64,
    /// Spin sweep against the normalized hard-core target.
    pub fidelity: f64,
    /// Spin final state against the hard-core projection of the boson
    /// final state.
    pub distance: f64,
    pub boson_fidelity: f64,
    pub projection_weight: f64,
    pub units: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_state: Option<StateDump>,
}

/// Runs the spin and boson sweeps for the same circuit and compares them.
pub fn sweep_comparison(
    u: &UnitaryMatrix,
    n: usize,
    sched: &SweepSchedule,
    delta: f64,
    keep_state: bool,
) -> Result<SweepResult> {
    let spin = adiabatic_sweep_spin(u, n, sched, delta)?;
    let boson = adiabatic_sweep_boson(u, n, n, sched, delta)?;
    let (projected, weight) = project_hardcore(&boson.state)?;
    let d = state_distance(&spin.state, &projected)?;
    Ok(SweepResult {
        ports: u.dim(),
        excitations: n,
        total_time: sched.total_time,
        epsilon: sched.epsilon,
        fidelity: spin.fidelity,
        distance: d.distance,
        boson_fidelity: boson.fidelity,
        projection_weight: weight,
        units: "delta",
        final_state: keep_state.then(|| spin.state.to_dump()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_orthogonal, haar_unitary, RngStream};

    fn orthogonal(m: usize, seed: u64) -> UnitaryMatrix {
        let mut rng = RngStream::new(seed, m as u64).rng();
        haar_orthogonal(m, &mut rng).unwrap().to_unitary()
    }

    #[test]
    fn schedule_endpoints_and_monotonicity() {
        let s = SweepSchedule::default();
        assert_eq!(s.lambda(0.0), 1.0);
        assert_eq!(s.lambda(s.total_time), 0.0);
        let mut prev = 1.0;
        for k in 0..=1000 {
            let l = s.lambda(k as f64 * s.total_time / 1000.0);
            assert!(l <= prev);
            prev = l;
        }
        assert!("linear".parse::<SweepProfile>().is_err());
        assert!(SweepSchedule::new(10.0, -1.0).is_err());
    }

    #[test]
    fn hardcore_single_excitation_is_first_column() {
        let mut rng = RngStream::new(5, 0).rng();
        let u = haar_unitary(5, &mut rng).unwrap();
        let (s, norm) = hardcore_bs_state(&u, 1).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        let bs = bs_state(&u, 1).unwrap();
        for m in 0..5 {
            let mut occ = vec![0u8; 5];
            occ[m] = 1;
            assert!((s.amplitude(1u128 << output_site(5, m)) - bs.amplitude(&occ)).norm() < 1e-15);
        }
    }

    #[test]
    fn hardcore_identity() {
        let (s, norm) = hardcore_bs_state(&UnitaryMatrix::identity(4), 2).unwrap();
        assert!((norm - 1.0).abs() < 1e-15);
        assert_eq!(s.amplitude(mask_of(&[4, 5])), Complex64::new(1.0, 0.0));
    }

    // Raise σ⁺ sums on a dense 2^M vector over the output qubits.
    fn dense_hardcore(u: &UnitaryMatrix, n: usize) -> Vec<Complex64> {
        let m = u.dim();
        let mut v = vec![ZERO; 1 << m];
        v[0] = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let mut next = vec![ZERO; 1 << m];
            for (s, a) in v.iter().enumerate() {
                for q in 0..m {
                    if s & (1 << q) == 0 {
                        next[s | (1 << q)] += u.get(q, col) * a;
                    }
                }
            }
            v = next;
        }
        v
    }

    #[test]
    fn hardcore_matches_dense_construction() {
        let mut rng = RngStream::new(6, 0).rng();
        let u = haar_unitary(6, &mut rng).unwrap();
        let (s, norm) = hardcore_bs_state(&u, 2).unwrap();
        let dense = dense_hardcore(&u, 2);
        for (mask, a) in dense.iter().enumerate() {
            let mask = (mask as u128) << 6;
            if mask.count_ones() == 2 {
                assert!((s.amplitude(mask) - a).norm() <= 1e-12);
            }
        }
        let collisions: f64 = (0..6).map(|m| (u.get(m, 0) * u.get(m, 1)).norm_sqr()).sum();
        assert!((norm * norm - (1.0 - 2.0 * collisions)).abs() <= 1e-12);
    }

    #[test]
    fn distance_examples() {
        let basis = Arc::new(SectorBasis::new(4, 1).unwrap());
        let a = SectorState::basis_state(basis.clone(), 1).unwrap();
        let b = SectorState::basis_state(basis, 2).unwrap();
        assert_eq!(state_distance(&a, &a).unwrap().distance, 0.0);
        assert!((state_distance(&a, &b).unwrap().distance - 2f64.sqrt()).abs() < 1e-15);
        let phased = SectorState::new(
            a.basis().clone(),
            a.amplitudes().iter().map(|z| z * Complex64::i()).collect(),
        )
        .unwrap();
        assert!(state_distance(&a, &phased).unwrap().distance < 1e-15);
        let other = SectorState::basis_state(Arc::new(SectorBasis::new(4, 2).unwrap()), 3).unwrap();
        assert!(matches!(state_distance(&a, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn truncation_and_filling_errors() {
        let u = UnitaryMatrix::identity(3);
        let s = SweepSchedule::default();
        assert!(matches!(
            adiabatic_sweep_boson(&u, 2, 1, &s, 1.0),
            Err(Error::Truncation { .. })
        ));
        assert!(matches!(
            adiabatic_sweep_spin(&u, 4, &s, 1.0),
            Err(Error::InvalidFilling { .. })
        ));
    }

    fn two_level_oracle(eps: f64, total: f64, steps: usize) -> [Complex64; 2] {
        // basis (a_in, a_out); H = [[ε·(2λ−1), 1], [1, ε·(1−2λ)]] up to a constant
        let sched = SweepSchedule::new(eps, total).unwrap();
        let h = |t: f64| {
            let l = sched.lambda(t);
            [[eps * (2.0 * l - 1.0), 1.0], [1.0, eps * (1.0 - 2.0 * l)]]
        };
        let f = |t: f64, y: [Complex64; 2]| {
            let m = h(t);
            let mi = Complex64::new(0.0, -1.0);
            [
                mi * (y[0] * m[0][0] + y[1] * m[0][1]),
                mi * (y[0] * m[1][0] + y[1] * m[1][1]),
            ]
        };
        let dt = total / steps as f64;
        let mut y = [Complex64::new(1.0, 0.0), ZERO];
        for k in 0..steps {
            let t = k as f64 * dt;
            let k1 = f(t, y);
            let k2 = f(t + dt / 2.0, [y[0] + k1[0] * dt / 2.0, y[1] + k1[1] * dt / 2.0]);
            let k3 = f(t + dt / 2.0, [y[0] + k2[0] * dt / 2.0, y[1] + k2[1] * dt / 2.0]);
            let k4 = f(t + dt, [y[0] + k3[0] * dt, y[1] + k3[1] * dt]);
            for i in 0..2 {
                y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * dt / 6.0;
            }
        }
        y
    }

    #[test]
    fn one_mode_matches_two_level_integration() {
        let u = UnitaryMatrix::identity(1);
        let sched = SweepSchedule::new(10.0, 50.0).unwrap();
        let r = adiabatic_sweep_boson(&u, 1, 1, &sched, 1.0).unwrap();
        let oracle = two_level_oracle(10.0, 50.0, 200_000);
        let p_out = r.state.amplitude(&[0, 1]).norm_sqr();
        assert!(
            (p_out - oracle[1].norm_sqr()).abs() < 1e-6,
            "{p_out} vs {}",
            oracle[1].norm_sqr()
        );
        let overlap = r.state.amplitude(&[1, 0]).conj() * oracle[0] + r.state.amplitude(&[0, 1]).conj() * oracle[1];
        assert!(1.0 - overlap.norm_sqr() <= 0.01);
        let spin = adiabatic_sweep_spin(&u, 1, &sched, 1.0).unwrap();
        assert!((spin.fidelity - r.fidelity).abs() < 1e-12);
    }

    #[test]
    fn frozen_detuning_blocks_tunnelling() {
        let mut rng = RngStream::new(8, 0).rng();
        let u = haar_unitary(3, &mut rng).unwrap();
        let (basis, h) = boson_sweep_hamiltonian(&u, 1, 1, 10.0, 1.0, |_| 1.0).unwrap();
        let mut psi0 = vec![ZERO; basis.len()];
        psi0[basis.index_of(&[1, 0, 0, 0, 0, 0]).unwrap()] = Complex64::new(1.0, 0.0);
        let mut worst: f64 = 1.0;
        evolve_schrodinger(&h, &psi0, 10.0, 0.01, Integrator::Magnus4, |_, psi| {
            worst = worst.min(psi[0].norm_sqr());
        })
        .unwrap();
        assert!(worst >= 0.99, "{worst}");
    }

    #[test]
    fn single_excitation_trajectories_coincide() {
        let u = orthogonal(4, 9);
        let sched = SweepSchedule::new(10.0, 20.0).unwrap();
        let (sb, hs) = spin_sweep_hamiltonian(&u, 1, 10.0, 1.0, move |t| sched.lambda(t)).unwrap();
        let (bb, hb) = boson_sweep_hamiltonian(&u, 1, 1, 10.0, 1.0, move |t| sched.lambda(t)).unwrap();
        // the boson basis index for each spin basis state
        let map: Vec<usize> = sb
            .states()
            .iter()
            .map(|&mask| {
                let occ: Vec<u8> = (0..8).map(|k| ((mask >> k) & 1) as u8).collect();
                bb.index_of(&occ).unwrap()
            })
            .collect();
        let mut p0s = vec![ZERO; sb.len()];
        p0s[sb.index_of(1).unwrap()] = Complex64::new(1.0, 0.0);
        let mut p0b = vec![ZERO; bb.len()];
        p0b[map[sb.index_of(1).unwrap()]] = Complex64::new(1.0, 0.0);
        let mut spin_traj = Vec::new();
        evolve_schrodinger(&hs, &p0s, 20.0, 0.05, Integrator::Magnus4, |_, p| {
            spin_traj.push(p.to_vec())
        })
        .unwrap();
        let mut k = 0;
        let mut worst: f64 = 0.0;
        evolve_schrodinger(&hb, &p0b, 20.0, 0.05, Integrator::Magnus4, |_, p| {
            for (i, &j) in map.iter().enumerate() {
                worst = worst.max((spin_traj[k][i] - p[j]).norm());
            }
            k += 1;
        })
        .unwrap();
        assert_eq!(k, spin_traj.len());
        assert!(worst <= 1e-9, "{worst}");
    }

    #[test]
    fn excitation_number_is_conserved_by_construction() {
        let u = orthogonal(3, 10);
        let (_, h) = spin_sweep_hamiltonian(&u, 2, 10.0, 1.0, |t| 1.0 - t).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert!(h.at(t).hermiticity_residual() < 1e-14);
        }
        let (basis, _) = boson_sweep_hamiltonian(&u, 2, 2, 10.0, 1.0, |t| 1.0 - t).unwrap();
        assert!(basis
            .states()
            .iter()
            .all(|s| s.iter().map(|&k| k as usize).sum::<usize>() == 2));
    }

    #[test]
    fn four_ports_one_boson() {
        let mut rng = RngStream::new(11, 0).rng();
        let u = haar_unitary(4, &mut rng).unwrap();
        let r = adiabatic_sweep_boson(&u, 1, 1, &SweepSchedule::default(), 1.0).unwrap();
        assert!(r.fidelity >= 0.99, "{}", r.fidelity);
        assert!(r.norm_drift < 1e-9);
    }

    fn mean_spin_fidelity(m: usize, t: f64) -> f64 {
        let sched = SweepSchedule::new(10.0, t).unwrap();
        (0..4)
            .map(|seed| {
                adiabatic_sweep_spin(&orthogonal(m, seed), 2, &sched, 1.0)
                    .unwrap()
                    .fidelity
            })
            .sum::<f64>()
            / 4.0
    }

    #[test]
    fn dilution_improves_spin_fidelity() {
        let (small, large) = (mean_spin_fidelity(4, 100.0), mean_spin_fidelity(16, 100.0));
        assert!(small <= large, "{small} {large}");
    }

    #[test]
    fn slower_boson_sweeps_do_not_lose_fidelity() {
        for (m, n) in [(1, 1), (4, 1), (4, 2), (6, 3)] {
            let mut rng = RngStream::new(15, m as u64).rng();
            let u = haar_unitary(m, &mut rng).unwrap();
            let f = |t: f64| {
                adiabatic_sweep_boson(&u, n, n, &SweepSchedule::new(10.0, t).unwrap(), 1.0)
                    .unwrap()
                    .fidelity
            };
            let (fast, slow) = (f(20.0), f(200.0));
            assert!(slow >= fast - 0.01, "M={m} N={n}: {fast} {slow}");
        }
    }

    #[test]
    fn coupling_scale_is_only_a_unit() {
        let u = orthogonal(3, 13);
        let s = SweepSchedule::new(10.0, 30.0).unwrap();
        let a = adiabatic_sweep_spin(&u, 2, &s, 1.0).unwrap();
        let b = adiabatic_sweep_spin(&u, 2, &s, 2.5).unwrap();
        assert!((a.fidelity - b.fidelity).abs() < 1e-8);
    }

    #[test]
    fn comparison_result_json_fields() {
        let u = orthogonal(3, 14);
        let r = sweep_comparison(&u, 2, &SweepSchedule::new(10.0, 20.0).unwrap(), 1.0, true).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["M", "N", "T", "epsilon", "fidelity", "distance", "final_state"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!((0.0..=1.0).contains(&r.fidelity));
        assert!(r.projection_weight <= 1.0 + 1e-12);
    }
}
