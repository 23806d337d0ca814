//! Spectral operators shared by the matrix catalog entries: tie grouping,
//! divided differences on a chosen piece, and the PSD cone indicator.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::Pick;
use crate::encoding::{smat, svec};
use crate::linalg::{random_gaussian_vector, random_orthogonal, sym_eigen_desc};
use crate::{lit, Error, Real, Result};

/// Relative tie threshold for eigen/singular values.
pub const TIE_REL: f64 = 1e-8;

pub fn tie_tol<T: Real>(scale: T) -> T {
    lit::<T>(TIE_REL) * (T::one() + scale.abs())
}

/// Block label of each sorted value; consecutive values within `tie` share a
/// label.
pub fn tie_labels<T: Real>(vals: &[T], tie: T) -> Vec<usize> {
    let mut labels = Vec::with_capacity(vals.len());
    let mut cur = 0;
    for i in 0..vals.len() {
        if i > 0 && vals[i - 1] - vals[i] > tie {
            cur += 1;
        }
        labels.push(cur);
    }
    labels
}

pub fn blocks_of(labels: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            out.push((start, i));
            start = i;
        }
    }
    out
}

/// Sorts each block of `mu` in decreasing order.
pub fn sort_within_blocks<T: Real>(mu: &mut DVector<T>, blocks: &[(usize, usize)]) {
    for &(a, b) in blocks {
        let mut part: Vec<T> = mu.as_slice()[a..b].to_vec();
        part.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        mu.as_mut_slice()[a..b].copy_from_slice(&part);
    }
}

/// Right-multiplies columns `a..b` of `m` by `o`.
pub fn rotate_columns<T: Real>(m: &mut DMatrix<T>, a: usize, b: usize, o: &DMatrix<T>) {
    let block = m.columns(a, b - a) * o;
    m.columns_mut(a, b - a).copy_from(&block);
}

/// A piece of the underlying vector function: values `f`, Jacobian `jac` of
/// the vector map on the selected piece, offsets `mu` (zero unless the piece
/// was selected by a random perturbation).
pub struct Piece<T: Real> {
    pub f: DVector<T>,
    pub jac: DMatrix<T>,
    pub mu: DVector<T>,
}

impl<T: Real> Piece<T> {
    /// First divided difference between positions `i`, `j`; `tied` says they
    /// share a tie block.
    pub fn dd1(&self, vals: &[T], jmu: &DVector<T>, i: usize, j: usize, tied: bool) -> T {
        if !tied {
            return (self.f[i] - self.f[j]) / (vals[i] - vals[j]);
        }
        let dm = self.mu[i] - self.mu[j];
        if dm != T::zero() {
            (jmu[i] - jmu[j]) / dm
        } else {
            self.jac[(i, i)] - self.jac[(i, j)]
        }
    }

    /// Sum quotient for the antisymmetric part; `both_zero` flags a pair of
    /// vanishing singular values.
    pub fn dd2(&self, vals: &[T], jmu: &DVector<T>, i: usize, j: usize, both_zero: bool) -> T {
        if !both_zero {
            return (self.f[i] + self.f[j]) / (vals[i] + vals[j]);
        }
        let sm = self.mu[i] + self.mu[j];
        if sm != T::zero() {
            (jmu[i] + jmu[j]) / sm
        } else {
            self.jac[(i, i)] + self.jac[(i, j)]
        }
    }

    pub fn dd3(&self, vals: &[T], jmu: &DVector<T>, i: usize, zero: bool) -> T {
        if !zero {
            return self.f[i] / vals[i];
        }
        if self.mu[i] != T::zero() {
            jmu[i] / self.mu[i]
        } else {
            self.jac[(i, i)]
        }
    }
}

/// Chooses the derivative of a scalar kink function `max(t − c, 0)` at a
/// point classified against the kink by `tie`.
pub fn kink_slope<T: Real>(gap: T, tie: T, pick: Pick, mu: T) -> T {
    let up = if gap > tie {
        true
    } else if gap < -tie {
        false
    } else {
        match pick {
            Pick::Max => true,
            Pick::Min => false,
            Pick::Random => mu > T::zero(),
        }
    };
    if up {
        T::one()
    } else {
        T::zero()
    }
}

pub(super) mod psd {
    use super::*;

    pub fn eig<T: Real>(z: &DVector<T>, p: usize) -> Result<(DVector<T>, DMatrix<T>)> {
        sym_eigen_desc(&smat(z, p))
    }

    fn rebuild<T: Real>(vals: &DVector<T>, q: &DMatrix<T>) -> DMatrix<T> {
        q * DMatrix::from_diagonal(vals) * q.transpose()
    }

    pub fn value<T: Real>(x: &DVector<T>, p: usize, tol: T) -> Result<Option<T>> {
        let (vals, _) = eig(x, p)?;
        Ok((vals.iter().all(|&l| l >= -tol)).then(T::zero))
    }

    pub fn project<T: Real>(z: &DVector<T>, p: usize) -> Result<DVector<T>> {
        let (vals, q) = eig(z, p)?;
        Ok(svec(&rebuild(&vals.map(|l| l.max(T::zero())), &q)))
    }

    pub fn prox_conj<T: Real>(z: &DVector<T>, p: usize) -> Result<DVector<T>> {
        Ok(-project(&(-z), p)?)
    }

    pub fn b_element<T: Real>(z: &DVector<T>, p: usize, pick: Pick, rng: &mut ChaCha8Rng) -> Result<DMatrix<T>> {
        let (vals, mut q) = eig(z, p)?;
        let tie = tie_tol(vals.amax());
        let labels = tie_labels(vals.as_slice(), tie);
        let blocks = blocks_of(&labels);
        let mut mu = DVector::zeros(p);
        if pick == Pick::Random {
            mu = random_gaussian_vector::<T, _>(p, rng);
            sort_within_blocks(&mut mu, &blocks);
            for &(a, b) in &blocks {
                if b - a > 1 {
                    rotate_columns(&mut q, a, b, &random_orthogonal(b - a, rng));
                }
            }
        }
        let slopes = DVector::from_fn(p, |i, _| kink_slope(vals[i], tie, pick, mu[i]));
        let piece = Piece {
            f: vals.map(|l| l.max(T::zero())),
            jac: DMatrix::from_diagonal(&slopes),
            mu,
        };
        let jmu = &piece.jac * &piece.mu;
        let omega = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                piece.jac[(i, i)]
            } else {
                piece.dd1(vals.as_slice(), &jmu, i, j, labels[i] == labels[j])
            }
        });
        let m = z.len();
        let mut out = DMatrix::zeros(m, m);
        for k in 0..m {
            let mut e = DVector::zeros(m);
            e[k] = T::one();
            let h = q.transpose() * smat(&e, p) * &q;
            let g = omega.component_mul(&h);
            out.set_column(k, &svec(&(&q * g * q.transpose())));
        }
        Ok(crate::linalg::symmetrize(&out))
    }

    fn check_dom<T: Real>(vals: &DVector<T>, tol: T) -> Result<()> {
        let worst = vals.min();
        if worst < -tol {
            Err(Error::DomainViolation(crate::to_f64(-worst)))
        } else {
            Ok(())
        }
    }

    /// Eigenvectors spanning the (numerical) kernel of `x`.
    fn kernel<T: Real>(vals: &DVector<T>, q: &DMatrix<T>, act: T) -> DMatrix<T> {
        let idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= act).collect();
        DMatrix::from_fn(q.nrows(), idx.len(), |r, c| q[(r, idx[c])])
    }

    pub fn directional_deriv<T: Real>(
        x: &DVector<T>,
        d: &DVector<T>,
        p: usize,
        act: T,
        tol: T,
    ) -> Result<Option<T>> {
        let (vals, q) = eig(x, p)?;
        check_dom(&vals, tol)?;
        let q0 = kernel(&vals, &q, act);
        if q0.ncols() == 0 {
            return Ok(Some(T::zero()));
        }
        let (dv, _) = sym_eigen_desc(&(q0.transpose() * smat(d, p) * &q0))?;
        let band = tol * (T::one() + d.norm());
        Ok((dv.min() >= -band).then(T::zero))
    }

    pub fn dom_normal_project<T: Real>(x: &DVector<T>, v: &DVector<T>, p: usize, act: T, tol: T) -> Result<DVector<T>> {
        let (vals, q) = eig(x, p)?;
        check_dom(&vals, tol)?;
        let q0 = kernel(&vals, &q, act);
        if q0.ncols() == 0 {
            return Ok(DVector::zeros(v.len()));
        }
        let block = q0.transpose() * smat(v, p) * &q0;
        let (bv, bq) = sym_eigen_desc(&block)?;
        let neg = rebuild(&bv.map(|l| l.min(T::zero())), &bq);
        Ok(svec(&(&q0 * neg * q0.transpose())))
    }

    /// Projection onto the critical cone `T(x) ∩ u^⊥`, read off the
    /// eigenstructure of `z = x + u`.
    pub fn critical_project<T: Real>(z: &DVector<T>, p: usize, d: &DVector<T>) -> Result<DVector<T>> {
        let (vals, q) = eig(z, p)?;
        let tie = tie_tol(vals.amax());
        let cls: Vec<i8> = vals
            .iter()
            .map(|&l| if l > tie { 1 } else if l < -tie { -1 } else { 0 })
            .collect();
        let mut dt = q.transpose() * smat(d, p) * &q;
        for i in 0..p {
            for j in 0..p {
                let (a, b) = (cls[i], cls[j]);
                if a < 1 && b < 1 && (a == -1 || b == -1) {
                    dt[(i, j)] = T::zero();
                }
            }
        }
        let beta: Vec<usize> = (0..p).filter(|&i| cls[i] == 0).collect();
        if !beta.is_empty() {
            let bb = DMatrix::from_fn(beta.len(), beta.len(), |r, c| dt[(beta[r], beta[c])]);
            let (bv, bq) = sym_eigen_desc(&bb)?;
            let proj = rebuild(&bv.map(|l| l.max(T::zero())), &bq);
            for (r, &i) in beta.iter().enumerate() {
                for (c, &j) in beta.iter().enumerate() {
                    dt[(i, j)] = proj[(r, c)];
                }
            }
        }
        Ok(svec(&(&q * dt * q.transpose())))
    }
}
