use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{OrthogonalMatrix, UnitaryMatrix};
use crate::{Error, Result};

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension("haar_unitary requires dim >= 1".into()));
    }
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let (mut q, r) = g.qr().unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        if n > 0.0 {
            let mut col = q.column_mut(j);
            col *= d / n;
        }
    }
    UnitaryMatrix::new(q)
}

/// Haar-random real orthogonal matrix: QR of a real Gaussian matrix with the
/// signs of `diag(R)` moved into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<OrthogonalMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension("haar_orthogonal requires dim >= 1".into()));
    }
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (mut q, r) = g.qr().unpack();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    OrthogonalMatrix::new(q)
}
