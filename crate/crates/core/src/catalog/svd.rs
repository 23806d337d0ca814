//! Weighted nuclear norm `w‖·‖_*` and spectral norm `w‖·‖₂` on `p×q`
//! matrices stored column-major. Tall inputs are handled through the
//! transpose so the decompositions are always wide.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::l1ball::{clip_top, lexicographic_piece, project_l1_ball, threshold_index, BallPiece, THRESHOLD_TOL};
use super::spectral::{blocks_of, kink_slope, rotate_columns, sort_within_blocks, tie_labels, tie_tol, Piece};
use super::Pick;
use crate::encoding::{mat_cm, vec_cm};
use crate::linalg::{random_gaussian_vector, random_orthogonal, singular_values, svd_full, sym_eigen_desc};
use crate::{lit, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Nuclear,
    Spectral,
}

/// Wide SVD of a vectorized matrix.
pub struct Wide<T: Real> {
    pub s: DVector<T>,
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
    pub transposed: bool,
}

impl<T: Real> Wide<T> {
    pub fn new(z: &DVector<T>, p: usize, q: usize) -> Result<Self> {
        let x = mat_cm(z, p, q);
        let transposed = p > q;
        let x = if transposed { x.transpose() } else { x };
        let (s, u, v) = svd_full(&x)?;
        Ok(Wide { s, u, v, transposed })
    }

    /// Orients a vectorized direction like the decomposed matrix.
    pub fn orient(&self, d: &DVector<T>, p: usize, q: usize) -> DMatrix<T> {
        let m = mat_cm(d, p, q);
        if self.transposed {
            m.transpose()
        } else {
            m
        }
    }

    pub fn unorient(&self, m: DMatrix<T>) -> DVector<T> {
        if self.transposed {
            vec_cm(&m.transpose())
        } else {
            vec_cm(&m)
        }
    }

    /// `U diag(vals) V₁ᵀ` padded with zero columns.
    pub fn rebuild(&self, vals: &[T]) -> DMatrix<T> {
        let (pp, qq) = (self.u.nrows(), self.v.nrows());
        let mut mid = DMatrix::zeros(pp, qq);
        for (i, &s) in vals.iter().enumerate() {
            mid[(i, i)] = s;
        }
        &self.u * mid * self.v.transpose()
    }

    pub fn rank(&self, act: T) -> usize {
        self.s.iter().filter(|&&v| v > act).count()
    }
}

pub fn value<T: Real>(x: &DVector<T>, p: usize, q: usize, norm: Norm, w: T) -> Result<T> {
    let dec = Wide::new(x, p, q)?;
    Ok(w * match norm {
        Norm::Nuclear => dec.s.sum(),
        Norm::Spectral => dec.s.iter().fold(T::zero(), |a, &v| a.max(v)),
    })
}

fn prox_values<T: Real>(s: &[T], norm: Norm, w: T) -> Vec<T> {
    match norm {
        Norm::Nuclear => s.iter().map(|&v| (v - w).max(T::zero())).collect(),
        Norm::Spectral => clip_top(s, w),
    }
}

pub fn prox<T: Real>(z: &DVector<T>, p: usize, q: usize, norm: Norm, w: T) -> Result<DVector<T>> {
    let dec = Wide::new(z, p, q)?;
    let f = prox_values(dec.s.as_slice(), norm, w);
    Ok(dec.unorient(dec.rebuild(&f)))
}

/// Projection onto the dual-norm ball of radius `w`.
pub fn prox_conj<T: Real>(z: &DVector<T>, p: usize, q: usize, norm: Norm, w: T) -> Result<DVector<T>> {
    let dec = Wide::new(z, p, q)?;
    let f: Vec<T> = match norm {
        Norm::Nuclear => dec.s.iter().map(|&v| v.min(w)).collect(),
        Norm::Spectral => {
            let scaled: Vec<T> = dec.s.iter().map(|&v| v / w).collect();
            project_l1_ball(&scaled, T::one()).into_iter().map(|v| v * w).collect()
        }
    };
    Ok(dec.unorient(dec.rebuild(&f)))
}

fn spectral_piece<T: Real>(s: &DVector<T>, w: T, pick: Pick, mu: &DVector<T>) -> BallPiece {
    let y: Vec<T> = s.iter().map(|&v| v / w).collect();
    let excess = y.iter().fold(T::zero(), |a, &v| a + v) - T::one();
    let tol = lit::<T>(THRESHOLD_TOL);
    match pick {
        Pick::Max if excess < -tol => BallPiece::Inside,
        Pick::Max => BallPiece::Outside(threshold_index(&y, true).max(1)),
        Pick::Min if excess > tol => BallPiece::Outside(threshold_index(&y, false).max(1)),
        Pick::Min => BallPiece::Inside,
        Pick::Random => lexicographic_piece(&y, mu.as_slice()),
    }
}

/// B-element of the prox Jacobian in the column-major basis.
pub fn b_element<T: Real>(
    z: &DVector<T>,
    p: usize,
    q: usize,
    norm: Norm,
    w: T,
    pick: Pick,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<T>> {
    let mut dec = Wide::new(z, p, q)?;
    let (pp, qq) = (dec.u.nrows(), dec.v.nrows());
    let s1 = if pp > 0 { dec.s[0] } else { T::zero() };
    let tie = tie_tol(s1);
    let r = dec.rank(tie);
    let mut labels = tie_labels(&dec.s.as_slice()[..r], tie);
    let zero_label = labels.last().map_or(0, |l| l + 1);
    labels.extend(std::iter::repeat_n(zero_label, pp - r));
    let blocks = blocks_of(&labels);

    let mut mu = DVector::zeros(pp);
    if pick == Pick::Random {
        mu = random_gaussian_vector::<T, _>(pp, rng);
        for i in r..pp {
            mu[i] = mu[i].abs();
        }
        sort_within_blocks(&mut mu, &blocks);
        for &(a, b) in &blocks {
            if a < r && b - a > 1 {
                let o = random_orthogonal(b - a, rng);
                rotate_columns(&mut dec.u, a, b, &o);
                rotate_columns(&mut dec.v, a, b, &o);
            }
        }
        if pp - r > 1 {
            rotate_columns(&mut dec.u, r, pp, &random_orthogonal(pp - r, rng));
        }
        if qq - r > 1 {
            rotate_columns(&mut dec.v, r, qq, &random_orthogonal(qq - r, rng));
        }
    }

    let f = DVector::from_vec(prox_values(dec.s.as_slice(), norm, w));
    let jac = match norm {
        Norm::Nuclear => DMatrix::from_diagonal(&DVector::from_fn(pp, |i, _| kink_slope(dec.s[i] - w, tie, pick, mu[i]))),
        Norm::Spectral => DMatrix::identity(pp, pp) - spectral_piece(&dec.s, w, pick, &mu).jacobian::<T>(pp),
    };
    let piece = Piece { f, jac, mu };
    let jmu = &piece.jac * &piece.mu;
    let sv = dec.s.as_slice();
    let d1 = DMatrix::from_fn(pp, pp, |i, j| {
        if i == j {
            T::zero()
        } else {
            piece.dd1(sv, &jmu, i, j, labels[i] == labels[j])
        }
    });
    let d2 = DMatrix::from_fn(pp, pp, |i, j| {
        if i == j {
            T::zero()
        } else {
            piece.dd2(sv, &jmu, i, j, i >= r && j >= r)
        }
    });
    let d3 = DVector::from_fn(pp, |i, _| piece.dd3(sv, &jmu, i, i >= r));
    let half = lit::<T>(0.5);

    let m = z.len();
    let mut out = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut e = DVector::zeros(m);
        e[k] = T::one();
        let h = dec.u.transpose() * dec.orient(&e, p, q) * &dec.v;
        let diag = DVector::from_fn(pp, |i, _| h[(i, i)]);
        let jd = &piece.jac * diag;
        let g = DMatrix::from_fn(pp, qq, |i, j| {
            if j >= pp {
                d3[i] * h[(i, j)]
            } else if i == j {
                jd[i]
            } else {
                let sym = (h[(i, j)] + h[(j, i)]) * half;
                let skew = (h[(i, j)] - h[(j, i)]) * half;
                d1[(i, j)] * sym + d2[(i, j)] * skew
            }
        });
        out.set_column(k, &dec.unorient(&dec.u * g * dec.v.transpose()));
    }
    Ok(crate::linalg::symmetrize(&out))
}

/// Indices of the leading tie block.
fn top_block<T: Real>(s: &DVector<T>, act: T) -> usize {
    s.iter().filter(|&&v| v >= s[0] - act).count()
}

pub fn directional_deriv<T: Real>(
    x: &DVector<T>,
    d: &DVector<T>,
    p: usize,
    q: usize,
    norm: Norm,
    w: T,
    act: T,
) -> Result<T> {
    let dec = Wide::new(x, p, q)?;
    let dm = dec.u.transpose() * dec.orient(d, p, q) * &dec.v;
    let (pp, qq) = dm.shape();
    let r = dec.rank(act);
    let val = match norm {
        Norm::Nuclear => {
            let tr = (0..r).fold(T::zero(), |a, i| a + dm[(i, i)]);
            let rest = dm.view((r, r), (pp - r, qq - r)).into_owned();
            let nuc = if rest.is_empty() { T::zero() } else { singular_values(&rest)?.sum() };
            tr + nuc
        }
        Norm::Spectral if r == 0 => {
            if dm.is_empty() {
                T::zero()
            } else {
                singular_values(&dm)?.max()
            }
        }
        Norm::Spectral => {
            let k = top_block(&dec.s, act);
            let blk = dm.view((0, 0), (k, k)).into_owned();
            let (ev, _) = sym_eigen_desc(&blk)?;
            ev[0]
        }
    };
    Ok(w * val)
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}`.
pub fn project_simplex<T: Real>(y: &[T]) -> Vec<T> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (i, &v) in sorted.iter().enumerate() {
        cum += v;
        let cand = (cum - T::one()) / lit::<T>((i + 1) as f64);
        if v > cand {
            theta = cand;
        }
    }
    y.iter().map(|&v| (v - theta).max(T::zero())).collect()
}

/// Projection of `y` onto `∂(w‖·‖)(x)`.
pub fn subgradient_project<T: Real>(
    x: &DVector<T>,
    y: &DVector<T>,
    p: usize,
    q: usize,
    norm: Norm,
    w: T,
    act: T,
) -> Result<DVector<T>> {
    let dec = Wide::new(x, p, q)?;
    let ym = dec.u.transpose() * dec.orient(y, p, q) * &dec.v;
    let (pp, qq) = ym.shape();
    let r = dec.rank(act);
    let mut out = DMatrix::zeros(pp, qq);
    match norm {
        Norm::Nuclear => {
            for i in 0..r {
                out[(i, i)] = w;
            }
            if pp > r {
                let rest = ym.view((r, r), (pp - r, qq - r)).into_owned();
                let inner = Wide::new(&vec_cm(&rest), pp - r, qq - r)?;
                let clipped: Vec<T> = inner.s.iter().map(|&v| v.min(w)).collect();
                out.view_mut((r, r), (pp - r, qq - r)).copy_from(&mat_cm(&inner.unorient(inner.rebuild(&clipped)), pp - r, qq - r));
            }
        }
        Norm::Spectral if r == 0 => {
            let inner = Wide::new(&vec_cm(&ym), pp, qq)?;
            let scaled: Vec<T> = inner.s.iter().map(|&v| v / w).collect();
            let proj: Vec<T> = project_l1_ball(&scaled, T::one()).into_iter().map(|v| v * w).collect();
            out = mat_cm(&inner.unorient(inner.rebuild(&proj)), pp, qq);
        }
        Norm::Spectral => {
            let k = top_block(&dec.s, act);
            let blk = ym.view((0, 0), (k, k)).into_owned();
            let (ev, evec) = sym_eigen_desc(&blk)?;
            let scaled: Vec<T> = ev.iter().map(|&v| v / w).collect();
            let lam = DVector::from_vec(project_simplex(&scaled)) * w;
            let m = &evec * DMatrix::from_diagonal(&lam) * evec.transpose();
            out.view_mut((0, 0), (k, k)).copy_from(&m);
        }
    }
    Ok(dec.unorient(&dec.u * out * dec.v.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn vecm(rows: usize, cols: usize, data: &[f64]) -> DVector<f64> {
        vec_cm(&DMatrix::from_row_slice(rows, cols, data))
    }

    #[test]
    fn spectral_prox_of_diag_two_one() {
        let z = vecm(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let out = prox(&z, 2, 2, Norm::Spectral, 1.0).unwrap();
        assert!((out - vecm(2, 2, &[1.0, 0.0, 0.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn nuclear_prox_soft_thresholds() {
        let z = vecm(2, 3, &[3.0, 0.0, 0.0, 0.0, 0.5, 0.0]);
        let out = prox(&z, 2, 3, Norm::Nuclear, 1.0).unwrap();
        assert!((out - vecm(2, 3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0])).norm() < 1e-12);
    }

    fn check_fd(z: &DVector<f64>, p: usize, q: usize, norm: Norm) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = b_element(z, p, q, norm, 1.0, Pick::Max, &mut rng).unwrap();
        let h = 1e-6;
        for k in 0..z.len() {
            let mut e = DVector::zeros(z.len());
            e[k] = 1.0;
            let fd = (prox(&(z + &e * h), p, q, norm, 1.0).unwrap() - prox(&(z - &e * h), p, q, norm, 1.0).unwrap()) / (2.0 * h);
            assert!((&fd - w.column(k)).norm() < 1e-5, "{norm:?} column {k}: {fd} vs {}", w.column(k));
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let z = vecm(2, 3, &[2.0, 0.3, -0.4, 0.1, 0.7, 0.2]);
        check_fd(&z, 2, 3, Norm::Nuclear);
        check_fd(&z, 2, 3, Norm::Spectral);
        let tall = vecm(3, 2, &[2.0, 0.3, -0.4, 0.1, 0.7, 0.2]);
        check_fd(&tall, 3, 2, Norm::Nuclear);
        check_fd(&tall, 3, 2, Norm::Spectral);
    }

    #[test]
    fn simplex_projection() {
        let out = project_simplex(&[0.5f64, 0.5, 0.5]);
        for v in out {
            assert!((v - 1.0 / 3.0).abs() < 1e-14);
        }
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    }
}
