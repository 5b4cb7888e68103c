use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexMatrix, RealMatrix};
use crate::{Error, Result};

/// Serialized matrix: `{"rows": r, "cols": c, "data": [[re, im], ...]}`,
/// row-major. Real matrices are written with `im = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_complex(m: &ComplexMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn from_real(m: &RealMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)], 0.0]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn check(&self) -> Result<()> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::Shape(format!(
                "matrix json declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        if self.data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Domain("matrix json has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn to_complex(&self) -> Result<ComplexMatrix> {
        self.check()?;
        Ok(ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            Complex64::new(re, im)
        }))
    }

    /// Real matrix; fails if any imaginary part is nonzero.
    pub fn to_real(&self) -> Result<RealMatrix> {
        self.check()?;
        if let Some(bad) = self.data.iter().find(|[_, im]| *im != 0.0) {
            return Err(Error::Domain(format!(
                "expected a real matrix, found imaginary part {}",
                bad[1]
            )));
        }
        Ok(RealMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.data[i * self.cols + j][0]
        }))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix json serialization is infallible")
    }
}
