use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::interferometer::CircuitResponse;
use crate::linalg::{ComplexMatrix, RealMatrix, UnitaryMatrix};
use crate::{Error, Result};

use super::SpinHamiltonian;

/// Slack allowed on `|λ/δ| ≤ 1` before the arccos.
const ARCCOS_CLAMP: f64 = 1e-12;
/// Asymmetry tolerated by [`unitary_from_couplings`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// One resonator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorMode {
    pub omega: f64,
    pub g: f64,
    /// Momentum ratio at which the circuit is evaluated for this mode.
    /// Defaults to `ω/Δ` (linear dispersion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

/// Qubit splitting plus either a resonator mode list or the open-waveguide
/// parameters. All quantities share one arbitrary frequency unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub delta: f64,
    #[serde(default)]
    pub modes: Vec<ResonatorMode>,
    /// Density of states at the qubit frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_of_states: Option<f64>,
    /// Resonant coupling amplitude `ḡ_Δ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonant_coupling: Option<f64>,
}

impl CouplingConfig {
    pub fn resonator(delta: f64, modes: Vec<ResonatorMode>) -> Self {
        Self {
            delta,
            modes,
            density_of_states: None,
            resonant_coupling: None,
        }
    }

    fn validate_resonator(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Domain(format!(
                "qubit splitting must be positive, got {}",
                self.delta
            )));
        }
        if self.modes.is_empty() {
            return Err(Error::Domain("resonator mode list is empty".into()));
        }
        for (k, mode) in self.modes.iter().enumerate() {
            if !(mode.omega > 0.0) || !mode.omega.is_finite() || !mode.g.is_finite() {
                return Err(Error::Domain(format!("mode {k} has invalid frequency or coupling")));
            }
        }
        let bad: Vec<usize> = self
            .modes
            .iter()
            .enumerate()
            .filter(|(_, m)| !((self.delta - m.omega).abs() > m.g.abs()))
            .map(|(k, _)| k)
            .collect();
        if !bad.is_empty() {
            return Err(Error::DispersiveViolation(bad));
        }
        Ok(())
    }

    /// Open-waveguide decay rate `Γ = 2ḡ²D`.
    pub fn decay_rate(&self) -> Result<f64> {
        match (self.density_of_states, self.resonant_coupling) {
            (Some(d), Some(g)) if d > 0.0 && d.is_finite() && g.is_finite() => Ok(2.0 * g * g * d),
            _ => Err(Error::Domain(
                "decay rate needs a positive density of states and a finite resonant coupling".into(),
            )),
        }
    }
}

/// Dispersive resonator couplings: `δ = Σ_k g_k²/(Δ−ω_k)`,
/// `J_mn = Σ_k Re U_mn(ν_k) g_k²/(Δ−ω_k)` and `Δ̃ = Δ + δ`.
pub fn resonator_couplings(cfg: &CouplingConfig, circuit: &dyn CircuitResponse) -> Result<SpinHamiltonian> {
    cfg.validate_resonator()?;
    let m = circuit.ports();
    let mut j = RealMatrix::zeros(m, m);
    let mut shift = 0.0;
    for mode in &cfg.modes {
        let w = mode.g * mode.g / (cfg.delta - mode.omega);
        shift += w;
        let u = circuit.unitary_at(mode.nu.unwrap_or(mode.omega / cfg.delta))?;
        j += u.real_part() * w;
    }
    SpinHamiltonian::new(cfg.delta + shift, j)
}

/// Finds a unitary with `Re U = J/δ`, where `δ` is the spectral radius of
/// the real symmetric `J`. Eigenvalues `λ` of `J` become phases
/// `e^{i·arccos(λ/δ)}` on the same eigenvectors.
pub fn unitary_from_couplings(j: &RealMatrix) -> Result<(UnitaryMatrix, f64)> {
    if !j.is_square() || j.nrows() == 0 {
        return Err(Error::Shape(format!(
            "couplings must be square, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    if j.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("couplings must be finite".into()));
    }
    let asym = (j - j.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::Symmetry(asym));
    }
    let sym = (j + j.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let delta = eig.eigenvalues.amax();
    if delta == 0.0 {
        return Err(Error::DegenerateInput("coupling matrix is zero".into()));
    }
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let mut phases = ComplexMatrix::zeros(j.nrows(), j.nrows());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let r = lambda / delta;
        if r.abs() > 1.0 + ARCCOS_CLAMP {
            return Err(Error::Domain(format!("eigenvalue ratio {r} outside [-1, 1]")));
        }
        phases[(k, k)] = Complex64::from_polar(1.0, r.clamp(-1.0, 1.0).acos());
    }
    let u = &v * phases * v.transpose();
    Ok((UnitaryMatrix::new(u)?, delta))
}
