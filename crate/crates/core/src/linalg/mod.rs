//! Dense matrix primitives, Haar sampling, permanents and random streams.

mod haar;
mod json;
mod permanent;
mod rng;
mod sparse;

pub use haar::{haar_orthogonal, haar_unitary};
pub use json::MatrixJson;
pub use permanent::{permanent, permanent_brute_force, MAX_PERMANENT_DIM};
pub use rng::RngStream;
pub use sparse::SparseMatrix;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex matrix, row/column indexed as `m[(row, col)]`.
pub type ComplexMatrix = DMatrix<Complex64>;
/// Dense real matrix.
pub type RealMatrix = DMatrix<f64>;

/// Residual accepted when a matrix is wrapped as [`UnitaryMatrix`] or
/// [`OrthogonalMatrix`].
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest entrywise modulus of a complex matrix.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `max |U†U - I|`.
pub fn unitarity_residual(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let g = u.adjoint() * u;
    max_abs_diff(&g, &ComplexMatrix::identity(u.nrows(), u.ncols()))
}

/// `max |OᵀO - I|`.
pub fn orthogonality_residual(o: &RealMatrix) -> f64 {
    if !o.is_square() {
        return f64::INFINITY;
    }
    let g = o.transpose() * o;
    (g - RealMatrix::identity(o.nrows(), o.ncols()))
        .iter()
        .fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Promotes a real matrix to a complex one.
pub fn complexify(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Square complex matrix with `‖U†U − I‖_max` below a construction tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    /// Wraps `m`, checking unitarity at [`UNITARITY_TOLERANCE`].
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, UNITARITY_TOLERANCE)
    }

    pub fn with_tolerance(m: ComplexMatrix, tolerance: f64) -> Result<Self> {
        if m.nrows() == 0 || !m.is_square() {
            return Err(Error::Shape(format!(
                "unitary must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let residual = unitarity_residual(&m);
        if residual > tolerance {
            return Err(Error::InvalidUnitary { residual, tolerance });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn residual(&self) -> f64 {
        unitarity_residual(&self.0)
    }

    /// Entrywise real part.
    pub fn real_part(&self) -> RealMatrix {
        self.0.map(|z| z.re)
    }

    /// Entrywise imaginary part.
    pub fn imag_part(&self) -> RealMatrix {
        self.0.map(|z| z.im)
    }

    /// Entrywise complex conjugate (still unitary).
    pub fn conjugate(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }
}

impl From<OrthogonalMatrix> for UnitaryMatrix {
    fn from(o: OrthogonalMatrix) -> Self {
        Self(complexify(&o.0))
    }
}

/// Square real matrix with `‖OᵀO − I‖_max` below a construction tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix(RealMatrix);

impl OrthogonalMatrix {
    pub fn new(m: RealMatrix) -> Result<Self> {
        Self::with_tolerance(m, UNITARITY_TOLERANCE)
    }

    pub fn with_tolerance(m: RealMatrix, tolerance: f64) -> Result<Self> {
        if m.nrows() == 0 || !m.is_square() {
            return Err(Error::Shape(format!(
                "orthogonal matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let residual = orthogonality_residual(&m);
        if residual > tolerance {
            return Err(Error::InvalidOrthogonal { residual, tolerance });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(RealMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &RealMatrix {
        &self.0
    }

    pub fn into_inner(self) -> RealMatrix {
        self.0
    }

    pub fn residual(&self) -> f64 {
        orthogonality_residual(&self.0)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn to_unitary(&self) -> UnitaryMatrix {
        UnitaryMatrix(complexify(&self.0))
    }
}
