//! Exact and crowded dark states of a real orthogonal circuit `O`.
//!
//! The creation operators
//! `W⁺_m = (Σ_n O_mn σ⁺_in,n − σ⁺_out,m)/√2` commute with every collective
//! lowering operator `S⁻_i` on the vacuum, so each `W⁺_m|0⟩` is dark.
//! Products of several `W⁺` ("crowded" states) leak through the hard-core
//! constraint; [`decay_norm`] measures that leak and [`monte_carlo_decay`]
//! averages it over Haar-random circuits.

use std::io::{self, Write};

use rand::seq::index::sample;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::dynamics::SparseState;
use crate::effective::collective_ops;
use crate::linalg::{haar_orthogonal, OrthogonalMatrix, RngStream};
use crate::{input_site, output_site, Error, Result};

/// Port and excitation limits for dark-state construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DarkStateBudget {
    pub max_ports: usize,
    pub max_excitations: usize,
}

impl DarkStateBudget {
    pub const DEFAULT: Self = Self {
        max_ports: 30,
        max_excitations: 5,
    };
    /// Enough for the `M = 50` grid; expect minutes per grid point.
    pub const LARGE: Self = Self {
        max_ports: 64,
        max_excitations: 5,
    };

    fn check(&self, ports: usize, excitations: usize) -> Result<()> {
        if ports > self.max_ports || excitations > self.max_excitations {
            return Err(Error::SizeLimit(format!(
                "M = {ports}, N = {excitations} exceeds the budget M ≤ {}, N ≤ {}",
                self.max_ports, self.max_excitations
            )));
        }
        Ok(())
    }
}

impl Default for DarkStateBudget {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// A circuit plus the distinct ports whose `W⁺` operators are applied.
#[derive(Debug, Clone)]
pub struct DarkStateSpec {
    o: OrthogonalMatrix,
    indices: Vec<usize>,
}

impl DarkStateSpec {
    pub fn new(o: OrthogonalMatrix, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSpec("at least one index is required".into()));
        }
        let m = o.dim();
        let mut seen = vec![false; m];
        for &j in &indices {
            if j >= m {
                return Err(Error::InvalidSpec(format!("index {j} out of range for {m} ports")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidSpec(format!("index {j} repeated")));
            }
        }
        Ok(Self { o, indices })
    }

    pub fn ports(&self) -> usize {
        self.o.dim()
    }

    pub fn excitations(&self) -> usize {
        self.indices.len()
    }

    pub fn circuit(&self) -> &OrthogonalMatrix {
        &self.o
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Site coefficients of `W⁺_m`.
    fn creation_coefficients(&self, m: usize) -> Vec<(usize, f64)> {
        let ports = self.ports();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut c: Vec<(usize, f64)> = (0..ports)
            .filter(|&n| self.o.get(m, n) != 0.0)
            .map(|n| (input_site(n), self.o.get(m, n) * r))
            .collect();
        c.push((output_site(ports, m), -r));
        c
    }
}

/// Unnormalized `Π_α W⁺_{j_α}|0⟩` and its norm.
#[derive(Debug, Clone)]
pub struct DarkState {
    pub state: SparseState<f64>,
    pub norm: f64,
}

pub fn dark_state(spec: &DarkStateSpec) -> Result<DarkState> {
    dark_state_with_budget(spec, DarkStateBudget::DEFAULT)
}

pub fn dark_state_with_budget(spec: &DarkStateSpec, budget: DarkStateBudget) -> Result<DarkState> {
    budget.check(spec.ports(), spec.excitations())?;
    let mut state = SparseState::vacuum(2 * spec.ports());
    for &j in &spec.indices {
        state = state.raise(&spec.creation_coefficients(j));
    }
    let norm = state.norm();
    Ok(DarkState { state, norm })
}

/// `‖S⁻_i ψ‖ / ‖ψ‖` for the crowded state `ψ` of `spec`.
pub fn decay_norm(spec: &DarkStateSpec, channel: usize) -> Result<f64> {
    if channel >= spec.ports() {
        return Err(Error::InvalidSpec(format!("channel {channel} out of range")));
    }
    let psi = dark_state(spec)?;
    let ops = collective_ops(&spec.o);
    Ok(ops.lower(channel, &psi.state).norm() / psi.norm)
}

/// Decay norms for every channel at once.
///
/// Each `(N−1)`-excitation state `b` collects a vector `r_b` with
/// `(S⁻_i ψ)(b) = r_b[i]/√2`: lowering input `k` adds `ψ(b+in_k)` to
/// `r_b[k]`, lowering output `n` adds `ψ(b+out_n)·O[n, ·]`.
pub fn channel_decay_norms(spec: &DarkStateSpec, psi: &DarkState) -> Vec<f64> {
    let m = spec.ports();
    let o = spec.o.as_matrix();
    let mut slots: FxHashMap<u128, usize> = FxHashMap::default();
    let mut rows: Vec<f64> = Vec::new();
    let mut slot = |b: u128, rows: &mut Vec<f64>| -> usize {
        *slots.entry(b).or_insert_with(|| {
            rows.extend(std::iter::repeat_n(0.0, m));
            rows.len() / m - 1
        })
    };
    // deterministic traversal order keeps the sums reproducible
    let mut entries: Vec<(u128, f64)> = psi.state.iter().collect();
    entries.sort_unstable_by_key(|&(mask, _)| mask);
    for (mask, a) in entries {
        let mut occ = mask;
        while occ != 0 {
            let s = occ.trailing_zeros() as usize;
            occ &= occ - 1;
            let k = slot(mask & !(1u128 << s), &mut rows);
            let r = &mut rows[k * m..(k + 1) * m];
            if s < m {
                r[s] += a;
            } else {
                for (ri, oi) in r.iter_mut().zip(o.row(s - m).iter()) {
                    *ri += a * oi;
                }
            }
        }
    }
    let n2 = psi.norm * psi.norm;
    (0..m)
        .map(|i| {
            let acc: f64 = rows.chunks_exact(m).map(|r| r[i] * r[i]).sum();
            (acc / 2.0 / n2).sqrt()
        })
        .collect()
}

/// Haar-averaged decay rate of an `N`-fold crowded state, in units of `Γ`:
/// `γ_N² = Σ_{n=2}^{N} (−1)ⁿ/2^{n+1} · N!/(N−n)! · n!/Mⁿ`, `γ₁ = 0`.
pub fn analytic_rate(ports: usize, excitations: usize) -> Result<f64> {
    if excitations == 0 || excitations > ports {
        return Err(Error::InvalidFilling { excitations, ports });
    }
    let m = ports as f64;
    let mut sum = 0.0;
    for n in 2..=excitations {
        let falling: f64 = (0..n).map(|k| (excitations - k) as f64).product();
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / 2f64.powi(n as i32 + 1) * falling * fact / m.powi(n as i32);
    }
    Ok(sum.max(0.0).sqrt())
}

/// How per-channel squared norms are combined within a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelAggregation {
    /// Average over the `M` channels.
    #[default]
    Mean,
    /// Sum over the `M` channels.
    Sum,
}

impl std::str::FromStr for ChannelAggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "sum" => Ok(Self::Sum),
            other => Err(Error::InvalidSpec(format!("unknown channel aggregation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub ports: usize,
    pub excitations: usize,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DecayOptions {
    pub aggregation: ChannelAggregation,
    pub budget: DarkStateBudget,
}

/// One Monte Carlo draw: Haar `O`, `N` distinct indices, then the
/// aggregated squared decay norm.
fn decay_sample(ports: usize, excitations: usize, stream: RngStream, opts: &DecayOptions) -> Result<f64> {
    let mut rng = stream.rng();
    let o = haar_orthogonal(ports, &mut rng)?;
    let indices = sample(&mut rng, ports, excitations).into_vec();
    let spec = DarkStateSpec::new(o, indices)?;
    let psi = dark_state_with_budget(&spec, opts.budget)?;
    let sq: f64 = channel_decay_norms(&spec, &psi).iter().map(|x| x * x).sum();
    Ok(match opts.aggregation {
        ChannelAggregation::Mean => sq / ports as f64,
        ChannelAggregation::Sum => sq,
    })
}

/// Monte Carlo estimate `γ = Γ·√E[N²]`, with a delta-method standard
/// error. Sample `s` draws from `rng.substream(s)`, so the result does not
/// depend on how rayon schedules the work.
pub fn monte_carlo_decay(
    ports: usize,
    excitations: usize,
    samples: usize,
    rng: RngStream,
    opts: DecayOptions,
) -> Result<DecayEstimate> {
    if samples == 0 {
        return Err(Error::InvalidSpec("at least one sample is required".into()));
    }
    let analytic = analytic_rate(ports, excitations)?;
    opts.budget.check(ports, excitations)?;
    if excitations == 1 {
        return Ok(DecayEstimate {
            ports,
            excitations,
            samples,
            mean: 0.0,
            stderr: 0.0,
            analytic,
        });
    }
    let xs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| decay_sample(ports, excitations, rng.substream(s as u64), &opts))
        .collect::<Result<_>>()?;
    let n = samples as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let gamma = mean_x.sqrt();
    let stderr = if samples > 1 && mean_x > 0.0 {
        let var = xs.iter().map(|x| (x - mean_x).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt() / (2.0 * gamma)
    } else {
        0.0
    };
    Ok(DecayEstimate {
        ports,
        excitations,
        samples,
        mean: gamma,
        stderr,
        analytic,
    })
}

pub const DECAY_CSV_HEADER: &str = "M,N,samples,gamma_mc_mean,gamma_mc_stderr,gamma_analytic";

pub fn write_decay_csv<W: Write>(mut out: W, rows: &[DecayEstimate]) -> io::Result<()> {
    writeln!(out, "{DECAY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.ports, r.excitations, r.samples, r.mean, r.stderr, r.analytic
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_lindblad, DensityMatrix, LindbladGenerator, TruncatedBasis};
    use crate::effective::build_lindbladian;
    use std::sync::Arc;

    fn haar(m: usize, seed: u64) -> OrthogonalMatrix {
        haar_orthogonal(m, &mut RngStream::new(seed, 0).rng()).unwrap()
    }

    #[test]
    fn spec_validation() {
        let o = OrthogonalMatrix::identity(3);
        assert!(matches!(
            DarkStateSpec::new(o.clone(), vec![]),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            DarkStateSpec::new(o.clone(), vec![1, 1]),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(DarkStateSpec::new(o, vec![3]), Err(Error::InvalidSpec(_))));
        let big = DarkStateSpec::new(OrthogonalMatrix::identity(31), vec![0]).unwrap();
        assert!(matches!(dark_state(&big), Err(Error::SizeLimit(_))));
        assert!(dark_state_with_budget(&big, DarkStateBudget::LARGE).is_ok());
    }

    #[test]
    fn single_dark_states_have_unit_norm_and_no_decay() {
        let o = haar(7, 1);
        for m in 0..7 {
            let spec = DarkStateSpec::new(o.clone(), vec![m]).unwrap();
            let psi = dark_state(&spec).unwrap();
            assert!((psi.norm - 1.0).abs() < 1e-12);
            for i in 0..7 {
                assert!(decay_norm(&spec, i).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn identity_circuit_gives_singlet_products() {
        for n in 1..=4 {
            let spec = DarkStateSpec::new(OrthogonalMatrix::identity(6), (0..n).map(|k| k + 1).collect()).unwrap();
            let psi = dark_state(&spec).unwrap();
            assert!((psi.norm - 1.0).abs() < 1e-12);
            for norm in channel_decay_norms(&spec, &psi) {
                assert!(norm <= 1e-12);
            }
        }
    }

    // Dense oracle on the full 2^{2M} register.
    fn dense_raise(v: &[f64], coeffs: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (idx, &a) in v.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for &(s, c) in coeffs {
                if idx >> s & 1 == 0 {
                    out[idx | 1 << s] += c * a;
                }
            }
        }
        out
    }

    #[test]
    fn sparse_amplitudes_match_dense_construction() {
        let m = 6;
        let o = haar(m, 2);
        let spec = DarkStateSpec::new(o.clone(), vec![4, 0, 2]).unwrap();
        let psi = dark_state(&spec).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = vec![0.0; 1 << (2 * m)];
        v[0] = 1.0;
        for &j in spec.indices() {
            let mut c: Vec<(usize, f64)> = (0..m).map(|n| (n, o.get(j, n) * r)).collect();
            c.push((m + j, -r));
            v = dense_raise(&v, &c);
        }
        for (idx, &a) in v.iter().enumerate() {
            assert!((psi.state.get(idx as u128) - a).abs() < 1e-12);
        }
        let dense_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((psi.norm - dense_norm).abs() < 1e-12);
    }

    #[test]
    fn fast_channel_norms_match_explicit_lowering() {
        let o = haar(8, 3);
        let spec = DarkStateSpec::new(o, vec![1, 5, 6, 2]).unwrap();
        let psi = dark_state(&spec).unwrap();
        let fast = channel_decay_norms(&spec, &psi);
        for (i, f) in fast.iter().enumerate() {
            let slow = decay_norm(&spec, i).unwrap();
            assert!((f - slow).abs() < 1e-12, "channel {i}: {f} vs {slow}");
        }
    }

    // For N = 2 only the commutator term survives:
    // S⁻_i W⁺_a W⁺_b|0⟩ = −O_ai O_bi σ⁺_in,i|0⟩/√2.
    #[test]
    fn pair_decay_matches_leading_term() {
        let o = haar(10, 4);
        let (a, b) = (3, 7);
        let spec = DarkStateSpec::new(o.clone(), vec![a, b]).unwrap();
        let psi = dark_state(&spec).unwrap();
        for i in 0..10 {
            let lead = ((o.get(a, i) * o.get(b, i)).powi(2) / 2.0).sqrt();
            let got = decay_norm(&spec, i).unwrap();
            assert!((got * psi.norm - lead).abs() < 1e-12);
            if lead > 1e-3 {
                assert!(((got - lead) / lead).abs() <= 0.2, "channel {i}: {got} vs {lead}");
            }
        }
    }

    #[test]
    fn analytic_values() {
        for m in 1..=100 {
            assert_eq!(analytic_rate(m, 1).unwrap(), 0.0);
            if m >= 2 {
                let closed = 1.0 / (2f64.sqrt() * m as f64);
                assert!((analytic_rate(m, 2).unwrap() - closed).abs() <= 1e-14);
            }
        }
        assert!((analytic_rate(10, 3).unwrap() - (0.015f64 - 0.00225).sqrt()).abs() < 1e-15);
        assert!((analytic_rate(10, 3).unwrap() - 0.11292).abs() < 1e-5);
        assert!(matches!(analytic_rate(3, 4), Err(Error::InvalidFilling { .. })));
    }

    #[test]
    fn single_excitation_estimate_is_exactly_zero() {
        let est = monte_carlo_decay(10, 1, 50, RngStream::new(1, 0), DecayOptions::default()).unwrap();
        assert_eq!((est.mean, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn pair_estimate_matches_analytic() {
        let est = monte_carlo_decay(10, 2, 500, RngStream::new(7, 0), DecayOptions::default()).unwrap();
        let tol = (3.0 * est.stderr).max(0.2 * est.analytic);
        assert!((est.mean - est.analytic).abs() <= tol, "{est:?}");
    }

    #[test]
    fn rate_decreases_with_ports() {
        let rates: Vec<f64> = [10, 20, 30]
            .iter()
            .map(|&m| {
                monte_carlo_decay(m, 3, 100, RngStream::new(11, 0), DecayOptions::default())
                    .unwrap()
                    .mean
            })
            .collect();
        assert!(rates[0] > rates[1] && rates[1] > rates[2], "{rates:?}");
    }

    #[test]
    fn stderr_shrinks_like_inverse_root_samples() {
        let a = monte_carlo_decay(8, 3, 200, RngStream::new(3, 0), DecayOptions::default()).unwrap();
        let b = monte_carlo_decay(8, 3, 800, RngStream::new(3, 0), DecayOptions::default()).unwrap();
        let ratio = a.stderr / b.stderr;
        assert!((1.5..=2.7).contains(&ratio), "{ratio}");
    }

    #[test]
    fn sum_aggregation_scales_by_channel_count() {
        let mean = monte_carlo_decay(6, 2, 40, RngStream::new(5, 0), DecayOptions::default()).unwrap();
        let sum = monte_carlo_decay(
            6,
            2,
            40,
            RngStream::new(5, 0),
            DecayOptions {
                aggregation: ChannelAggregation::Sum,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((sum.mean - mean.mean * 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo_decay(10, 3, 64, RngStream::new(9, 0), DecayOptions::default()).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        let row = DecayEstimate {
            ports: 10,
            excitations: 2,
            samples: 5,
            mean: 0.5,
            stderr: 0.25,
            analytic: 0.125,
        };
        write_decay_csv(&mut buf, &[row]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{DECAY_CSV_HEADER}\n10,2,5,0.5,0.25,0.125\n")
        );
    }

    #[test]
    fn lindblad_keeps_single_dark_states_stationary() {
        for m in 1..=4 {
            let o = haar(m, 20 + m as u64);
            let spec = DarkStateSpec::new(o.clone(), vec![m - 1]).unwrap();
            let psi = dark_state(&spec).unwrap();
            let basis = Arc::new(TruncatedBasis::new(2 * m, 1).unwrap());
            let generator =
                LindbladGenerator::new(&build_lindbladian(&o.to_unitary(), 1.0).unwrap(), basis.clone()).unwrap();
            let rho0 = DensityMatrix::from_pure(basis, &psi.state).unwrap();
            let p0 = rho0.populations();
            let mut worst: f64 = 0.0;
            evolve_lindblad(&generator, &rho0, 10.0, 0.01, |_, rho| {
                for (a, b) in rho.populations().iter().zip(&p0) {
                    worst = worst.max((a - b).abs());
                }
            })
            .unwrap();
            assert!(worst <= 1e-8, "M = {m}: {worst:e}");
        }
    }
}
