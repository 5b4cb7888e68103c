//! Multiport interferometers built from two-port cells.
//!
//! A cell `(θ, φ)` acting on ports `(m, n)` at momentum ratio `ν` is
//!
//! ```text
//! ⎡ sin(θν)·e^{iφν/2}   cos(θν)·e^{iφν/2} ⎤
//! ⎣ cos(θν)             −sin(θν)          ⎦
//! ```
//!
//! i.e. a real reflection followed by a phase shifter on port `m`. A mesh
//! applies optional input phases, then its cells in order (later cells
//! multiply on the left), then optional output phases. Phases scale linearly
//! with `ν`; `ν = 1` is the qubit resonance.
//!
//! Negative `ν` describes waves travelling backwards through the circuit. The
//! backward transfer matrix is the inverse transpose of the forward one,
//! assembled cell by cell, which makes `U(−ν) = conj U(ν)` for any mesh.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{ComplexMatrix, UnitaryMatrix, UNITARITY_TOLERANCE};
use crate::{Error, Result};

/// Largest port count accepted by [`decompose`].
pub const MAX_DECOMPOSE_PORTS: usize = 64;
/// Residual above which [`decompose`] rejects its input.
pub const DECOMPOSE_INPUT_TOLERANCE: f64 = 1e-8;
/// Pivot magnitude treated as already nulled.
const PIVOT_EPS: f64 = 1e-14;

type Block = [[Complex64; 2]; 2];

/// One two-port interferometer cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPortCell {
    pub theta: f64,
    pub phi: f64,
    pub modes: [usize; 2],
}

impl TwoPortCell {
    /// New cell with both angles reduced to `[0, 2π)`.
    pub fn new(theta: f64, phi: f64, m: usize, n: usize) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Domain("cell angles must be finite".into()));
        }
        if m == n {
            return Err(Error::Domain(format!("cell couples port {m} to itself")));
        }
        Ok(Self {
            theta: wrap_angle(theta),
            phi: wrap_angle(phi),
            modes: [m, n],
        })
    }

    fn validate(&self, ports: usize) -> Result<()> {
        let [m, n] = self.modes;
        if m == n || m >= ports || n >= ports {
            return Err(Error::Domain(format!(
                "cell modes ({m}, {n}) invalid for {ports} ports"
            )));
        }
        for (name, a) in [("theta", self.theta), ("phi", self.phi)] {
            if !(0.0..TAU).contains(&a) {
                return Err(Error::Domain(format!("cell {name} = {a} outside [0, 2π)")));
            }
        }
        Ok(())
    }

    fn block(&self, nu: f64) -> Block {
        let (s, c) = (self.theta * nu).sin_cos();
        let e = Complex64::from_polar(1.0, self.phi * nu / 2.0);
        [[e * s, e * c], [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)]]
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("momentum ratio must be finite, got {nu}")))
    }
}

/// The 2×2 transfer matrix of a single cell at momentum ratio `nu`.
pub fn two_port_unitary(cell: &TwoPortCell, nu: f64) -> Result<UnitaryMatrix> {
    check_nu(nu)?;
    let b = cell.block(nu);
    UnitaryMatrix::new(ComplexMatrix::from_row_slice(
        2,
        2,
        &[b[0][0], b[0][1], b[1][0], b[1][1]],
    ))
}

/// An ordered mesh of two-port cells on `ports` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferometerMesh {
    pub ports: usize,
    pub cells: Vec<TwoPortCell>,
    /// Per-port phases applied after the last cell (empty = none).
    #[serde(default)]
    pub output_phases: Vec<f64>,
    /// Per-port phases applied before the first cell (empty = none).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_phases: Vec<f64>,
}

impl InterferometerMesh {
    pub fn empty(ports: usize) -> Self {
        Self {
            ports,
            cells: Vec::new(),
            output_phases: Vec::new(),
            input_phases: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ports == 0 {
            return Err(Error::InvalidDimension("mesh needs at least one port".into()));
        }
        if self.cells.len() > self.ports * self.ports {
            return Err(Error::SizeLimit(format!(
                "{} cells exceed the M² = {} bound",
                self.cells.len(),
                self.ports * self.ports
            )));
        }
        for cell in &self.cells {
            cell.validate(self.ports)?;
        }
        for (name, phases) in [("output", &self.output_phases), ("input", &self.input_phases)] {
            if !phases.is_empty() && phases.len() != self.ports {
                return Err(Error::Shape(format!(
                    "{name} phases have length {}, expected {}",
                    phases.len(),
                    self.ports
                )));
            }
            if phases.iter().any(|p| !p.is_finite()) {
                return Err(Error::Domain(format!("{name} phases must be finite")));
            }
        }
        Ok(())
    }

    /// Random mesh with uniformly drawn angles, distinct mode pairs and
    /// random phases. Mainly for tests and benchmarks.
    pub fn random<R: Rng + ?Sized>(ports: usize, cells: usize, rng: &mut R) -> Self {
        assert!(ports >= 2, "random mesh needs at least two ports");
        let cells = (0..cells)
            .map(|_| {
                let m = rng.random_range(0..ports);
                let mut n = rng.random_range(0..ports - 1);
                if n >= m {
                    n += 1;
                }
                TwoPortCell::new(rng.random_range(0.0..TAU), rng.random_range(0.0..TAU), m, n)
                    .expect("random cell is valid")
            })
            .collect();
        Self {
            ports,
            cells,
            output_phases: (0..ports).map(|_| rng.random_range(0.0..TAU)).collect(),
            input_phases: (0..ports).map(|_| rng.random_range(0.0..TAU)).collect(),
        }
    }

    /// Applies `self` first and `next` afterwards. Phases between the two
    /// meshes cannot be represented, so `self` must have no output phases
    /// and `next` no input phases.
    pub fn then(&self, next: &InterferometerMesh) -> Result<InterferometerMesh> {
        if self.ports != next.ports {
            return Err(Error::Shape(format!(
                "cannot compose meshes on {} and {} ports",
                self.ports, next.ports
            )));
        }
        if self.output_phases.iter().chain(&next.input_phases).any(|&p| p != 0.0) {
            return Err(Error::Domain("composition requires no phases at the junction".into()));
        }
        Ok(InterferometerMesh {
            ports: self.ports,
            cells: self.cells.iter().chain(&next.cells).copied().collect(),
            output_phases: next.output_phases.clone(),
            input_phases: self.input_phases.clone(),
        })
    }

    /// Transfer matrix `U(ν)`; see the module docs for the sign convention.
    pub fn unitary(&self, nu: f64) -> Result<UnitaryMatrix> {
        check_nu(nu)?;
        self.validate()?;
        let m = self.ports;
        let a = nu.abs();
        let backward = nu < 0.0;
        let phase = |p: f64| {
            let z = Complex64::from_polar(1.0, p * a);
            if backward {
                // inverse transpose of a diagonal phase
                Complex64::new(1.0, 0.0) / z
            } else {
                z
            }
        };

        let mut u = ComplexMatrix::identity(m, m);
        for (j, &p) in self.input_phases.iter().enumerate() {
            u[(j, j)] = phase(p);
        }
        for cell in &self.cells {
            let mut b = cell.block(a);
            if backward {
                b = inverse_transpose(&b);
            }
            apply_rows(&mut u, cell.modes, &b);
        }
        for (j, &p) in self.output_phases.iter().enumerate() {
            let z = phase(p);
            let mut row = u.row_mut(j);
            row *= z;
        }
        UnitaryMatrix::new(u)
    }
}

fn inverse_transpose(b: &Block) -> Block {
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    // (Bᵀ)⁻¹ = adj(Bᵀ)/det
    [[b[1][1] / det, -b[1][0] / det], [-b[0][1] / det, b[0][0] / det]]
}

/// Left-multiplies rows `(m, n)` of `u` by the 2×2 block `b`.
fn apply_rows(u: &mut ComplexMatrix, [m, n]: [usize; 2], b: &Block) {
    for col in 0..u.ncols() {
        let x = u[(m, col)];
        let y = u[(n, col)];
        u[(m, col)] = b[0][0] * x + b[0][1] * y;
        u[(n, col)] = b[1][0] * x + b[1][1] * y;
    }
}

/// Evaluates `mesh` at momentum ratio `nu`.
pub fn mesh_unitary(mesh: &InterferometerMesh, nu: f64) -> Result<UnitaryMatrix> {
    mesh.unitary(nu)
}

#[derive(Clone, Copy)]
enum PendingPhase {
    Input,
    Cell(usize),
    Spent,
}

/// Triangular (Reck-order) decomposition of `u` into a mesh whose `ν = 1`
/// transfer matrix reproduces `u`.
///
/// Rows are nulled bottom-up by column operations `X ← X·T†`. Each cell
/// zeroes one sub-diagonal entry; the phase that makes the two combined
/// entries relatively real is supplied by the still-unfixed phase shifter of
/// the cell that last touched that column, or by an input phase on the first
/// sweep. The diagonal that remains becomes the output phases. Uses
/// `M(M−1)/2` cells.
pub fn decompose(u: &UnitaryMatrix) -> Result<InterferometerMesh> {
    decompose_matrix(u.as_matrix())
}

/// As [`decompose`], accepting any matrix whose unitarity residual is at most
/// [`DECOMPOSE_INPUT_TOLERANCE`].
pub fn decompose_matrix(u: &ComplexMatrix) -> Result<InterferometerMesh> {
    let m = u.nrows();
    if m == 0 || !u.is_square() {
        return Err(Error::Shape(format!(
            "cannot decompose a {}x{} matrix",
            u.nrows(),
            u.ncols()
        )));
    }
    if m > MAX_DECOMPOSE_PORTS {
        return Err(Error::SizeLimit(format!(
            "decomposition supports at most {MAX_DECOMPOSE_PORTS} ports, got {m}"
        )));
    }
    let residual = crate::linalg::unitarity_residual(u);
    if !(residual <= DECOMPOSE_INPUT_TOLERANCE) {
        return Err(Error::InvalidUnitary {
            residual,
            tolerance: DECOMPOSE_INPUT_TOLERANCE,
        });
    }

    let mut x = u.clone();
    let mut cells: Vec<TwoPortCell> = Vec::with_capacity(m * (m - 1) / 2);
    let mut input_phases = vec![0.0; m];
    let mut pending = vec![PendingPhase::Input; m];

    for r in (1..m).rev() {
        for j in 0..r {
            let (cm, cn) = (j, j + 1);
            // Rephase column n so that x[r][m] / x[r][n] is real.
            let xm = x[(r, cm)];
            let xn = x[(r, cn)];
            let chi = if xm.norm() > PIVOT_EPS && xn.norm() > PIVOT_EPS {
                (xn.arg() - xm.arg()).rem_euclid(PI)
            } else {
                0.0
            };
            match pending[cn] {
                PendingPhase::Input => input_phases[cn] = wrap_angle(chi),
                PendingPhase::Cell(idx) => cells[idx].phi = wrap_angle(2.0 * chi),
                PendingPhase::Spent => unreachable!("column {cn} rephased twice"),
            }
            pending[cn] = PendingPhase::Spent;
            if chi != 0.0 {
                let mut col = x.column_mut(cn);
                col *= Complex64::from_polar(1.0, -chi);
            }

            let xm = x[(r, cm)];
            let xn = x[(r, cn)];
            let theta = if xm.norm() < PIVOT_EPS {
                FRAC_PI_2
            } else {
                let w = if xn.norm() >= PIVOT_EPS {
                    xn / xn.norm()
                } else {
                    xm / xm.norm()
                };
                let a = (xm * w.conj()).re;
                let b = (xn * w.conj()).re;
                (-b).atan2(a)
            };
            let cell = TwoPortCell::new(theta, 0.0, cm, cn)?;
            let (s, c) = cell.theta.sin_cos();
            for row in 0..m {
                let a = x[(row, cm)];
                let b = x[(row, cn)];
                x[(row, cm)] = a * s + b * c;
                x[(row, cn)] = a * c - b * s;
            }
            pending[cm] = PendingPhase::Cell(cells.len());
            cells.push(cell);
        }
    }

    let output_phases = (0..m).map(|j| wrap_angle(x[(j, j)].arg())).collect();
    Ok(InterferometerMesh {
        ports: m,
        cells,
        output_phases,
        input_phases,
    })
}

/// Reconstructs the resonant (`ν = 1`) unitary of a mesh.
pub fn reconstruct(mesh: &InterferometerMesh) -> Result<UnitaryMatrix> {
    mesh.unitary(1.0)
}

/// Anything that yields the circuit transfer matrix at a momentum ratio.
pub trait CircuitResponse {
    fn ports(&self) -> usize;
    fn unitary_at(&self, nu: f64) -> Result<UnitaryMatrix>;
}

impl CircuitResponse for InterferometerMesh {
    fn ports(&self) -> usize {
        self.ports
    }

    fn unitary_at(&self, nu: f64) -> Result<UnitaryMatrix> {
        self.unitary(nu)
    }
}

/// A momentum-independent circuit: `U` for forward waves and `conj U` for
/// backward ones.
#[derive(Debug, Clone)]
pub struct FixedCircuit(pub UnitaryMatrix);

impl CircuitResponse for FixedCircuit {
    fn ports(&self) -> usize {
        self.0.dim()
    }

    fn unitary_at(&self, nu: f64) -> Result<UnitaryMatrix> {
        check_nu(nu)?;
        Ok(if nu < 0.0 { self.0.conjugate() } else { self.0.clone() })
    }
}

/// Tolerance used by tests and callers that compare reconstructed meshes.
pub const ROUND_TRIP_TOLERANCE: f64 = UNITARITY_TOLERANCE;
