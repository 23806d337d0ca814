//! Flattening of matrix-valued images into vectors.
//!
//! Symmetric `p×p` matrices use `svec`: the lower triangle is read column by
//! column with off-diagonal entries scaled by `√2`, so Frobenius inner products
//! and norms coincide with Euclidean ones. General `p×q` matrices use
//! column-major `vec`.

use nalgebra::{DMatrix, DVector};

use crate::{lit, Real};

/// Length of `svec` for a `p×p` symmetric matrix.
pub fn svec_dim(p: usize) -> usize {
    p * (p + 1) / 2
}

pub fn svec<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let p = m.nrows();
    let r2 = lit::<T>(2.0).sqrt();
    let mut out = DVector::zeros(svec_dim(p));
    let mut k = 0;
    for j in 0..p {
        for i in j..p {
            out[k] = if i == j { m[(i, j)] } else { (m[(i, j)] + m[(j, i)]) / lit::<T>(2.0) * r2 };
            k += 1;
        }
    }
    out
}

pub fn smat<T: Real>(v: &DVector<T>, p: usize) -> DMatrix<T> {
    debug_assert_eq!(v.len(), svec_dim(p));
    let r2 = lit::<T>(2.0).sqrt();
    let mut m = DMatrix::zeros(p, p);
    let mut k = 0;
    for j in 0..p {
        for i in j..p {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / r2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

pub fn vec_cm<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

pub fn mat_cm<T: Real>(v: &DVector<T>, p: usize, q: usize) -> DMatrix<T> {
    debug_assert_eq!(v.len(), p * q);
    DMatrix::from_column_slice(p, q, v.as_slice())
}
