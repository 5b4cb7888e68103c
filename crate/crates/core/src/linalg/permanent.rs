use num_complex::Complex64;

use super::ComplexMatrix;
use crate::{Error, Result};

/// Largest matrix accepted by [`permanent`].
pub const MAX_PERMANENT_DIM: usize = 20;

/// Permanent via Ryser's inclusion–exclusion formula, visiting column subsets
/// in Gray-code order so each step updates the row sums by one column.
pub fn permanent(m: &ComplexMatrix) -> Result<Complex64> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!(
            "permanent of a non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if n > MAX_PERMANENT_DIM {
        return Err(Error::SizeLimit(format!(
            "permanent dimension {n} exceeds {MAX_PERMANENT_DIM}"
        )));
    }
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }

    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u32 = 0;
    for k in 1u32..(1u32 << n) {
        let col = k.trailing_zeros() as usize;
        gray ^= 1 << col;
        if gray & (1 << col) != 0 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += m[(i, col)];
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= m[(i, col)];
            }
        }
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |acc, s| acc * s);
        if gray.count_ones().is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}

/// Permanent as an explicit sum over all `n!` permutations. Intended for
/// cross-checking [`permanent`] on small matrices.
pub fn permanent_brute_force(m: &ComplexMatrix) -> Complex64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "permanent_brute_force: non-square");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = Complex64::new(0.0, 0.0);
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let term = |p: &[usize]| {
        p.iter()
            .enumerate()
            .fold(Complex64::new(1.0, 0.0), |acc, (i, &j)| acc * m[(i, j)])
    };
    total += term(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            total += term(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    total
}
