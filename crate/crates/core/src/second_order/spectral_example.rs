//! Closed-form SSOSC data for `g = w‖·‖₂`, written from the singular value
//! decomposition of `A = F(x̄) + ū` without going through `W̄`.
//!
//! Three regimes by `‖A‖_*/w`: below one the image set is `{0}`; at one it
//! is `{R[aI_r 0; 0 D]Sᵀ}` with `Γ ≡ 0`; above one it is the image of
//! `D ↦ D − R[Z₁ Z₂]Sᵀ` with `Γ` given by an explicit sum of squares.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::preimage_basis;
use crate::catalog::l1ball::THRESHOLD_TOL;
use crate::catalog::{spectral_thresholds, CatalogFunction, CatalogKind, SpectralThresholds, TIE_REL};
use crate::encoding::{mat_cm, vec_cm};
use crate::linalg::{range_basis, svd_full, sym_eigen_desc, symmetrize};
use crate::model::ProblemSpec;
use crate::solver::ensure_kkt;
use crate::{lit, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralCase {
    /// `‖A‖_* < w`.
    Inside,
    /// `‖A‖_* = w`.
    Boundary,
    /// `‖A‖_* > w`.
    Outside,
}

#[derive(Debug, Clone)]
pub struct SpectralForm<T: Real> {
    pub case: SpectralCase,
    /// `‖A‖_*/w`.
    pub scaled_nuclear_norm: T,
    pub rank: usize,
    pub thresholds: Option<SpectralThresholds<T>>,
    /// Orthonormal basis (columns, column-major vec) of the image set.
    pub image_basis: DMatrix<T>,
    /// Matrix of the quadratic form standing for `Γ` on the image set.
    pub form: DMatrix<T>,
}

/// `vec(a bᵀ)` for a `p×q` matrix.
fn outer<T: Real>(a: &DVector<T>, b: &DVector<T>) -> DVector<T> {
    vec_cm(&(a * b.transpose()))
}

fn wide_form<T: Real>(a: &DMatrix<T>, w: T) -> Result<SpectralForm<T>> {
    let (p, q) = a.shape();
    let m = p * q;
    let (sigma, rr, ss) = svd_full(a)?;
    let y: DVector<T> = sigma.map(|s| s / w);
    let tie = lit::<T>(TIE_REL) * (T::one() + y.iter().fold(T::zero(), |acc, &v| acc.max(v)));
    let r = y.iter().filter(|&&v| v > tie).count();
    let total = y.sum();
    let tol = lit::<T>(THRESHOLD_TOL);
    let col = |mat: &DMatrix<T>, j: usize| mat.column(j).into_owned();

    if total < T::one() - tol {
        return Ok(SpectralForm {
            case: SpectralCase::Inside,
            scaled_nuclear_norm: total,
            rank: r,
            thresholds: None,
            image_basis: DMatrix::zeros(m, 0),
            form: DMatrix::zeros(m, m),
        });
    }
    if total <= T::one() + tol {
        let mut cols = Vec::new();
        if r > 0 {
            let lead = (0..r).fold(DVector::zeros(m), |acc, i| acc + outer(&col(&rr, i), &col(&ss, i)));
            cols.push(lead / lit::<T>(r as f64).sqrt());
        }
        for i in r..p {
            for j in r..q {
                cols.push(outer(&col(&rr, i), &col(&ss, j)));
            }
        }
        let image_basis = if cols.is_empty() { DMatrix::zeros(m, 0) } else { DMatrix::from_columns(&cols) };
        return Ok(SpectralForm {
            case: SpectralCase::Boundary,
            scaled_nuclear_norm: total,
            rank: r,
            thresholds: None,
            image_basis,
            form: DMatrix::zeros(m, m),
        });
    }

    let thr = spectral_thresholds(&y)?;
    let k1 = thr.k1;
    let pv = thr.p.clone();
    let two = lit::<T>(2.0);
    let half = lit::<T>(0.5);

    let mut form = DMatrix::zeros(m, m);
    let mut add = |weight: T, l: DVector<T>| {
        form += &l * l.transpose() * weight;
    };
    for i in 0..k1 {
        let (ri, si) = (col(&rr, i), col(&ss, i));
        for j in (i + 1)..q {
            let sj = col(&ss, j);
            if j >= p {
                add(pv[i] / (y[i] - pv[i]), outer(&ri, &sj));
                continue;
            }
            let rj = col(&rr, j);
            let sym = (outer(&ri, &sj) + outer(&rj, &si)) * half;
            let skew = (outer(&ri, &sj) - outer(&rj, &si)) * half;
            if j < k1 {
                add(two * (pv[i] + pv[j]) / (y[i] + y[j] - pv[i] - pv[j]), skew);
            } else if j < r {
                let gap = y[i] - y[j] - pv[i];
                if gap.abs() > tie {
                    add(two * pv[i] / gap, sym);
                }
                add(two * pv[i] / (y[i] + y[j] - pv[i]), skew);
            } else {
                add(two * pv[i] / (y[i] - pv[i]), sym);
                add(two * pv[i] / (y[i] - pv[i]), skew);
            }
        }
    }

    let omega = DMatrix::from_fn(p, p, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        if b < k1 {
            T::one()
        } else if a < k1 && b < r {
            pv[a] / (y[a] - y[b])
        } else if a < k1 {
            pv[a] / y[a]
        } else {
            T::zero()
        }
    });
    let gam = DMatrix::from_fn(p, p, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        if b < k1 {
            (pv[a] + pv[b]) / (y[a] + y[b])
        } else if a < k1 && b < r {
            pv[a] / (y[a] + y[b])
        } else if a < k1 {
            pv[a] / y[a]
        } else {
            T::zero()
        }
    });
    let upsilon: Vec<T> = (0..k1).map(|k| pv[k] / y[k]).collect();
    let s1 = ss.columns(0, p).into_owned();
    let s2 = ss.columns(p, q - p).into_owned();
    let mut images = Vec::with_capacity(m);
    for k in 0..m {
        let mut e = DVector::zeros(m);
        e[k] = T::one();
        let dmat = mat_cm(&e, p, q);
        let d1 = rr.transpose() * &dmat * &s1;
        let d2 = rr.transpose() * &dmat * &s2;
        let d1s = (&d1 + d1.transpose()) * half;
        let d1a = (&d1 - d1.transpose()) * half;
        let mean = (0..k1).fold(T::zero(), |acc, i| acc + d1[(i, i)]) / lit::<T>(k1 as f64);
        let mut z1 = omega.component_mul(&d1s) + gam.component_mul(&d1a);
        for i in 0..k1 {
            z1[(i, i)] -= mean;
        }
        let z2 = DMatrix::from_fn(p, q - p, |i, j| if i < k1 { upsilon[i] * d2[(i, j)] } else { T::zero() });
        let mut z = DMatrix::zeros(p, q);
        z.view_mut((0, 0), (p, p)).copy_from(&z1);
        z.view_mut((0, p), (p, q - p)).copy_from(&z2);
        images.push(vec_cm(&(dmat - &rr * z * ss.transpose())));
    }
    let image_basis = range_basis(&DMatrix::from_columns(&images), lit(1e-8), lit(1e-12));
    Ok(SpectralForm {
        case: SpectralCase::Outside,
        scaled_nuclear_norm: total,
        rank: r,
        thresholds: Some(thr),
        image_basis,
        form: symmetrize(&form),
    })
}

/// Permutation with `vec(Xᵀ) = P vec(X)` for `p×q` matrices.
fn transpose_permutation<T: Real>(p: usize, q: usize) -> DMatrix<T> {
    let m = p * q;
    let mut perm = DMatrix::zeros(m, m);
    for i in 0..p {
        for j in 0..q {
            perm[(i * q + j, j * p + i)] = T::one();
        }
    }
    perm
}

/// Example data at `A` (column-major vec) for a spectral-norm catalog entry.
pub fn spectral_case_form<T: Real>(g: &CatalogFunction<T>, a: &DVector<T>) -> Result<SpectralForm<T>> {
    if g.kind != CatalogKind::Spectral {
        return Err(Error::InvalidParameter(format!("expected a spectral-norm term, got {}", g.kind)));
    }
    let (p, q) = (g.shape[0], g.shape[1]);
    if a.len() != p * q {
        return Err(Error::DimensionMismatch(format!("expected {} entries, got {}", p * q, a.len())));
    }
    let mat = mat_cm(a, p, q);
    if p <= q {
        return wide_form(&mat, g.sigma);
    }
    let mut sf = wide_form(&mat.transpose(), g.sigma)?;
    let perm = transpose_permutation::<T>(p, q);
    sf.image_basis = perm.transpose() * &sf.image_basis;
    sf.form = perm.transpose() * &sf.form * &perm;
    Ok(sf)
}

/// Smallest eigenvalue of the explicit SSOSC form restricted to
/// `{d : ∇F d ∈ image set}`; `None` when that subspace is trivial.
pub fn spectral_ssosc_margin<T: Real>(
    problem: &ProblemSpec<T>,
    x: &DVector<T>,
    u: &DVector<T>,
) -> Result<(SpectralForm<T>, Option<T>)> {
    ensure_kkt(problem, x, u)?;
    let a = problem.f_value(x) + u;
    let sf = spectral_case_form(&problem.g, &a)?;
    let jf = problem.f_jacobian(x);
    let proj = &sf.image_basis * sf.image_basis.transpose();
    let b = preimage_basis(&jf, &proj);
    if b.ncols() == 0 {
        return Ok((sf, None));
    }
    let h = b.transpose() * (problem.lagrangian_hessian(x, u) + jf.transpose() * &sf.form * &jf) * &b;
    let (ev, _) = sym_eigen_desc(&h)?;
    let lmin = ev.min();
    Ok((sf, Some(lmin)))
}
