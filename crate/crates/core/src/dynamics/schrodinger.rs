use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::SparseMatrix;
use crate::{Error, Result};

/// Residual above which a sampled Hamiltonian is rejected.
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A possibly time-dependent Hamiltonian acting on dense vectors.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;
    /// `y += scale · H(t) x`.
    fn apply_add(&self, t: f64, scale: Complex64, x: &[Complex64], y: &mut [Complex64]);
    fn hermiticity_residual(&self, t: f64) -> f64;
    /// Upper bound on the spectral norm of `H(t)`.
    fn norm_bound(&self, t: f64) -> f64;
}

impl Hamiltonian for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_add(&self, _t: f64, scale: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        self.matvec_add(scale, x, y);
    }

    fn hermiticity_residual(&self, _t: f64) -> f64 {
        SparseMatrix::hermiticity_residual(self)
    }

    fn norm_bound(&self, _t: f64) -> f64 {
        self.max_row_abs_sum()
    }
}

type Profile = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// `H(t) = Σ_k f_k(t) H_k` with fixed sparse parts and real profiles.
pub struct ParametricHamiltonian {
    dim: usize,
    parts: Vec<(SparseMatrix, Profile)>,
}

impl ParametricHamiltonian {
    pub fn new(dim: usize) -> Self {
        Self { dim, parts: Vec::new() }
    }

    pub fn with_part(mut self, part: SparseMatrix, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        assert_eq!(
            (part.nrows(), part.ncols()),
            (self.dim, self.dim),
            "part has wrong shape"
        );
        self.parts.push((part, Box::new(profile)));
        self
    }

    /// `H(t)` assembled as one sparse matrix.
    pub fn at(&self, t: f64) -> SparseMatrix {
        self.parts
            .iter()
            .fold(SparseMatrix::zeros(self.dim, self.dim), |acc, (h, f)| {
                acc.add(&h.scale(Complex64::new(f(t), 0.0)))
            })
    }
}

impl Hamiltonian for ParametricHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_add(&self, t: f64, scale: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        for (h, f) in &self.parts {
            let c = f(t);
            if c != 0.0 {
                h.matvec_add(scale * c, x, y);
            }
        }
    }

    fn hermiticity_residual(&self, t: f64) -> f64 {
        self.at(t).hermiticity_residual()
    }

    fn norm_bound(&self, t: f64) -> f64 {
        self.parts.iter().map(|(h, f)| f(t).abs() * h.max_row_abs_sum()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Classical fourth-order Runge–Kutta.
    #[default]
    Rk4,
    /// Fourth-order commutator-free Magnus with Lanczos exponentials.
    Magnus4,
}

/// Result of a pure-state integration.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: Vec<Complex64>,
    pub steps: usize,
    /// Largest `|‖ψ(t)‖ − ‖ψ(0)‖|` seen during the run.
    pub norm_drift: f64,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidStep(format!("dt must be positive and finite, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidStep(format!("t_end must be non-negative, got {t_end}")));
    }
    Ok((t_end / dt - 1e-9).ceil().max(0.0) as usize)
}

type Stepper<'a> = dyn FnMut(f64, &mut Vec<Complex64>) -> Result<()> + 'a;

/// Integrates `i dψ/dt = H(t) ψ` from `0` to `t_end` with steps no larger
/// than `dt` (the last step is shortened so the run ends exactly at
/// `t_end`). `observe` sees the initial state and the state after every
/// step.
pub fn evolve_schrodinger<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &[Complex64],
    t_end: f64,
    dt: f64,
    integrator: Integrator,
    mut observe: impl FnMut(f64, &[Complex64]),
) -> Result<Evolution> {
    let steps = step_count(t_end, dt)?;
    if psi0.len() != h.dim() {
        return Err(Error::Shape(format!(
            "state of length {} for a Hamiltonian of dimension {}",
            psi0.len(),
            h.dim()
        )));
    }
    for t in [0.0, t_end / 2.0, t_end] {
        let residual = h.hermiticity_residual(t);
        if !(residual <= HERMITICITY_TOLERANCE) {
            return Err(Error::InvalidHamiltonian { time: t, residual });
        }
    }

    let mut psi = psi0.to_vec();
    let n0 = norm(&psi);
    let mut drift: f64 = 0.0;
    observe(0.0, &psi);
    if steps == 0 {
        return Ok(Evolution {
            state: psi,
            steps,
            norm_drift: 0.0,
        });
    }
    let h_step = t_end / steps as f64;
    let mut stepper: Box<Stepper<'_>> = match integrator {
        Integrator::Rk4 => {
            let mut rk = Rk4Workspace::new(psi.len());
            Box::new(move |t, psi: &mut Vec<Complex64>| {
                rk.step(h, t, h_step, psi);
                Ok(())
            })
        }
        Integrator::Magnus4 => Box::new(move |t, psi: &mut Vec<Complex64>| cf4_step(h, t, h_step, psi)),
    };
    for k in 0..steps {
        let t = k as f64 * h_step;
        stepper(t, &mut psi)?;
        drift = drift.max((norm(&psi) - n0).abs());
        observe(t + h_step, &psi);
    }
    Ok(Evolution {
        state: psi,
        steps,
        norm_drift: drift,
    })
}

struct Rk4Workspace {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![ZERO; n]),
            tmp: vec![ZERO; n],
        }
    }

    fn deriv<H: Hamiltonian + ?Sized>(h: &H, t: f64, x: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        h.apply_add(t, Complex64::new(0.0, -1.0), x, out);
    }

    fn step<H: Hamiltonian + ?Sized>(&mut self, h: &H, t: f64, dt: f64, psi: &mut [Complex64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        Self::deriv(h, t, psi, k1);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k1[i] * (dt / 2.0);
        }
        Self::deriv(h, t + dt / 2.0, tmp, k2);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k2[i] * (dt / 2.0);
        }
        Self::deriv(h, t + dt / 2.0, tmp, k3);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k3[i] * dt;
        }
        Self::deriv(h, t + dt, tmp, k4);
        for i in 0..psi.len() {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}

fn cf4_step<H: Hamiltonian + ?Sized>(h: &H, t: f64, dt: f64, psi: &mut Vec<Complex64>) -> Result<()> {
    let r = 3f64.sqrt() / 6.0;
    let (t1, t2) = (t + (0.5 - r) * dt, t + (0.5 + r) * dt);
    let (a1, a2) = (0.25 + r, 0.25 - r);
    for (w1, w2) in [(a1, a2), (a2, a1)] {
        let apply = |x: &[Complex64], y: &mut [Complex64]| {
            y.fill(ZERO);
            h.apply_add(t1, Complex64::new(w1, 0.0), x, y);
            h.apply_add(t2, Complex64::new(w2, 0.0), x, y);
        };
        *psi = expm_krylov(&apply, psi, dt)?;
    }
    Ok(())
}

const KRYLOV_MAX_DIM: usize = 40;
const KRYLOV_TOLERANCE: f64 = 1e-12;
const KRYLOV_MAX_SPLITS: u32 = 20;

/// `exp(−iτA) v` for Hermitian `A` given as a matrix-vector product, by
/// Lanczos with full reorthogonalization. The step is subdivided when the
/// Krylov estimate does not reach the tolerance.
pub fn expm_krylov(
    apply: &dyn Fn(&[Complex64], &mut [Complex64]),
    v: &[Complex64],
    tau: f64,
) -> Result<Vec<Complex64>> {
    expm_krylov_split(apply, v, tau, 0)
}

fn expm_krylov_split(
    apply: &dyn Fn(&[Complex64], &mut [Complex64]),
    v: &[Complex64],
    tau: f64,
    depth: u32,
) -> Result<Vec<Complex64>> {
    match lanczos_expm(apply, v, tau) {
        Some(out) => Ok(out),
        None if depth < KRYLOV_MAX_SPLITS => {
            let half = expm_krylov_split(apply, v, tau / 2.0, depth + 1)?;
            expm_krylov_split(apply, &half, tau / 2.0, depth + 1)
        }
        None => Err(Error::InvalidStep(format!(
            "Krylov exponential did not converge for step {tau}"
        ))),
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn lanczos_expm(apply: &dyn Fn(&[Complex64], &mut [Complex64]), v: &[Complex64], tau: f64) -> Option<Vec<Complex64>> {
    let n = v.len();
    let beta0 = norm(v);
    if beta0 == 0.0 || tau == 0.0 {
        return Some(v.to_vec());
    }
    let max_dim = KRYLOV_MAX_DIM.min(n);
    let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|z| z / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; n];
    let mut scale = 0.0f64;

    for j in 0..max_dim {
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for (k, q) in basis.iter().enumerate() {
            let c = if k == j {
                Complex64::new(a, 0.0)
            } else if k + 1 == j {
                Complex64::new(beta[k], 0.0)
            } else {
                ZERO
            };
            if c != ZERO {
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        // second pass against every vector
        for q in &basis {
            let c = dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
        let b = norm(&w);
        scale = scale.max(a.abs()).max(b);
        let m = j + 1;
        let y = tridiagonal_expm_first_column(&alpha, &beta, tau);
        let breakdown = b <= 1e-14 * scale.max(1.0);
        let estimate = b * y[m - 1].norm();
        if breakdown || m == n || estimate <= KRYLOV_TOLERANCE {
            let mut out = vec![ZERO; n];
            for (q, yk) in basis.iter().zip(&y) {
                let c = yk * beta0;
                for (o, qi) in out.iter_mut().zip(q) {
                    *o += c * qi;
                }
            }
            return Some(out);
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    None
}

/// First column of `exp(−iτT)` for the symmetric tridiagonal `T`.
fn tridiagonal_expm_first_column(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    let q = eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)];
                    Complex64::from_polar(q, -tau * eig.eigenvalues[k])
                })
                .sum()
        })
        .collect()
}
