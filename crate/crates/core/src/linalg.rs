//! Dense linear-algebra helpers on top of nalgebra: sorted decompositions,
//! range/null-space bases and rank-aware pseudo-inverses.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{lit, Error, Real, Result};

/// Convergence tolerances, in units of machine epsilon, tried in turn. At
/// exactly machine epsilon nalgebra's SVD can return a wrong factorization of
/// rank-deficient input, so every result is checked by reconstruction.
const EPS_FACTORS: [f64; 4] = [5.0, 20.0, 100.0, 1000.0];

/// SVD with `U` and `Vᵀ`, checked by reconstruction.
pub fn svd_checked<T: Real>(m: &DMatrix<T>) -> Result<SVD<T, Dyn, Dyn>> {
    let tol = T::default_epsilon().sqrt() * (T::one() + m.norm());
    for &f in &EPS_FACTORS {
        let Some(svd) = SVD::try_new(m.clone(), true, true, T::default_epsilon() * lit(f), 10_000) else { continue };
        if let Ok(back) = svd.clone().recompose() {
            if (back - m).norm() <= tol {
                return Ok(svd);
            }
        }
    }
    let svd = jacobi_svd(m);
    let back = svd.clone().recompose().map_err(|_| Error::SpectralDecompositionFailure)?;
    if (back - m).norm() <= tol {
        Ok(svd)
    } else {
        Err(Error::SpectralDecompositionFailure)
    }
}

/// One-sided Jacobi SVD, the fallback when the bidiagonal iteration misbehaves.
fn jacobi_svd<T: Real>(m: &DMatrix<T>) -> SVD<T, Dyn, Dyn> {
    let wide = m.nrows() < m.ncols();
    let mut a = if wide { m.transpose() } else { m.clone() };
    let (r, c) = a.shape();
    let mut v = DMatrix::<T>::identity(c, c);
    let eps = T::default_epsilon();
    for _ in 0..60 {
        let mut rotated = false;
        for i in 0..c {
            for j in (i + 1)..c {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for k in 0..mat.nrows() {
                        let (x, y) = (mat[(k, i)], mat[(k, j)]);
                        mat[(k, i)] = cs * x - sn * y;
                        mat[(k, j)] = sn * x + cs * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = DVector::from_fn(c, |k, _| a.column(k).norm());
    let mut u = DMatrix::<T>::zeros(r, c);
    let floor = eps * (T::one() + sigma.max());
    for k in 0..c {
        if sigma[k] > floor {
            u.set_column(k, &(a.column(k) / sigma[k]));
        }
    }
    // Complete the columns belonging to zero singular values.
    for k in 0..c {
        if sigma[k] > floor {
            continue;
        }
        for e in 0..r {
            let mut cand = DVector::<T>::zeros(r);
            cand[e] = T::one();
            for l in 0..c {
                if l != k {
                    let col = u.column(l).into_owned();
                    cand -= &col * col.dot(&cand);
                }
            }
            let nrm = cand.norm();
            if nrm > lit(0.5) {
                u.set_column(k, &(cand / nrm));
                break;
            }
        }
    }
    if wide {
        SVD { u: Some(v), v_t: Some(u.transpose()), singular_values: sigma }
    } else {
        SVD { u: Some(u), v_t: Some(v.transpose()), singular_values: sigma }
    }
}

/// Singular values only (same checks as [`svd_checked`]).
pub fn singular_values<T: Real>(m: &DMatrix<T>) -> Result<DVector<T>> {
    Ok(svd_checked(m)?.singular_values)
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
pub fn sym_eigen_desc<T: Real>(m: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let sym = (m + m.transpose()) * lit::<T>(0.5);
    let tol = T::default_epsilon().sqrt() * (T::one() + sym.norm());
    let eig = EPS_FACTORS
        .iter()
        .filter_map(|&f| SymmetricEigen::try_new(sym.clone(), T::default_epsilon() * lit(f), 10_000))
        .find(|e| (&e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues) * e.eigenvectors.transpose() - &sym).norm() <= tol)
        .ok_or(Error::SpectralDecompositionFailure)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// Full singular value decomposition `X = U [diag(σ) 0] Vᵀ` of a `p×q`
/// matrix with `p ≤ q`; `U` is `p×p`, `V` is `q×q`, `σ` nonincreasing.
pub fn svd_full<T: Real>(x: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>, DMatrix<T>)> {
    let (p, q) = x.shape();
    assert!(p <= q, "svd_full expects a wide or square matrix");
    let svd = svd_checked(x)?;
    let u = svd.u.ok_or(Error::SpectralDecompositionFailure)?;
    let vt = svd.v_t.ok_or(Error::SpectralDecompositionFailure)?;
    let k = svd.singular_values.len();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma = DVector::from_iterator(k, idx.iter().map(|&i| svd.singular_values[i]));
    let mut uu = DMatrix::zeros(p, p);
    let mut v1 = DMatrix::zeros(q, k);
    for (c, &i) in idx.iter().enumerate() {
        uu.set_column(c, &u.column(i));
        v1.set_column(c, &vt.row(i).transpose());
    }
    let v = complete_basis(&v1);
    Ok((sigma, uu, v))
}

/// Extends a matrix with orthonormal columns to a square orthogonal matrix.
pub fn complete_basis<T: Real>(basis: &DMatrix<T>) -> DMatrix<T> {
    let (n, k) = basis.shape();
    let mut cols: Vec<DVector<T>> = (0..k).map(|j| basis.column(j).into_owned()).collect();
    let tol = lit::<T>(1e-6);
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[e] = T::one();
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let nv = v.norm();
        if nv > tol {
            cols.push(v / nv);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Orthonormal basis of the range of `m` (singular values above
/// `rel_tol · σ_max`, and above `abs_floor`).
pub fn range_basis<T: Real>(m: &DMatrix<T>, rel_tol: T, abs_floor: T) -> DMatrix<T> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(r, 0);
    }
    let Ok(svd) = svd_checked(m) else {
        return DMatrix::zeros(r, 0);
    };
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.max();
    let cut = (smax * rel_tol).max(abs_floor);
    let cols: Vec<DVector<T>> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cut)
        .map(|i| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(r, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of `ker m`.
pub fn null_basis<T: Real>(m: &DMatrix<T>, rel_tol: T, abs_floor: T) -> DMatrix<T> {
    let c = m.ncols();
    let row_space = range_basis(&m.transpose(), rel_tol, abs_floor);
    let full = complete_basis(&row_space);
    let k = row_space.ncols();
    full.columns(k, c - k).into_owned()
}

/// Orthonormalizes the columns of `m`, dropping dependent ones.
pub fn orthonormalize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    range_basis(m, lit(1e-10), lit(1e-12))
}

/// Smallest singular value; an empty matrix reports 1.
pub fn sigma_min<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::one();
    }
    singular_values(m).map_or(T::zero(), |s| s.min())
}

/// The `rows`-th singular value of a `rows×cols` matrix: positive iff the
/// matrix maps onto `R^rows`.
pub fn surjectivity_margin<T: Real>(m: &DMatrix<T>) -> T {
    let (r, c) = m.shape();
    if r == 0 {
        return T::one();
    }
    if c < r {
        return T::zero();
    }
    let mut sv: Vec<T> = singular_values(m).map_or_else(|_| vec![T::zero()], |s| s.iter().copied().collect());
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv[r - 1]
}

/// Eigenspace data for the Moore–Penrose inverse of a symmetric PSD matrix:
/// retained eigenvectors (columns) and eigenvalues above `rel_cut · λ_max`.
#[derive(Debug, Clone)]
pub struct RetainedEigen<T: Real> {
    pub vectors: DMatrix<T>,
    pub values: DVector<T>,
}

impl<T: Real> RetainedEigen<T> {
    pub fn new(w: &DMatrix<T>, rel_cut: T) -> Result<Self> {
        let n = w.nrows();
        let (vals, vecs) = sym_eigen_desc(w)?;
        let lmax = if n > 0 { vals[0].max(T::zero()) } else { T::zero() };
        let cut = (lmax * rel_cut).max(lit(1e-14));
        let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > cut).collect();
        let vectors = if keep.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&keep.iter().map(|&i| vecs.column(i).into_owned()).collect::<Vec<_>>())
        };
        let values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| vals[i]));
        Ok(Self { vectors, values })
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// Orthogonal projector onto the retained eigenspace.
    pub fn projector(&self) -> DMatrix<T> {
        &self.vectors * self.vectors.transpose()
    }

    /// Distance of `v` from the retained eigenspace.
    pub fn residual(&self, v: &DVector<T>) -> T {
        let c = self.vectors.transpose() * v;
        (v - &self.vectors * c).norm()
    }

    /// `W† v` restricted to the retained eigenspace.
    pub fn pinv_apply(&self, v: &DVector<T>) -> DVector<T> {
        let mut c = self.vectors.transpose() * v;
        for i in 0..c.len() {
            c[i] /= self.values[i];
        }
        &self.vectors * c
    }

    /// Matrix of the quadratic form `y ↦ ⟨y, (W† − I) y⟩` on the retained
    /// eigenspace (zero on its complement).
    pub fn curvature_matrix(&self) -> DMatrix<T> {
        let d = DMatrix::from_diagonal(&self.values.map(|l| T::one() / l - T::one()));
        &self.vectors * d * self.vectors.transpose()
    }
}

/// Haar-distributed random orthogonal `k×k` matrix.
pub fn random_orthogonal<T: Real, R: Rng + ?Sized>(k: usize, rng: &mut R) -> DMatrix<T> {
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(k, k, |_, _| lit::<T>(StandardNormal.sample(rng)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < T::zero() {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

pub fn random_gaussian_vector<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(n, |_, _| lit::<T>(StandardNormal.sample(rng)))
}

pub fn random_unit_vector<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    loop {
        let v = random_gaussian_vector::<T, R>(n, rng);
        let nv = v.norm();
        if nv > lit(1e-8) {
            return v / nv;
        }
    }
}

/// Largest deviation from symmetry.
pub fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * lit::<T>(0.5)
}
