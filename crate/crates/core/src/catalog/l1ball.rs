//! Sort-and-threshold projection onto the ℓ1 ball, its piecewise-affine
//! structure on sorted inputs, and the dual top-clipping prox of `t‖·‖_∞`.

use nalgebra::{DMatrix, DVector};

use crate::{lit, Error, Real, Result};

/// Absolute tolerance on the threshold inequalities that define `k1`/`k2`.
pub const THRESHOLD_TOL: f64 = 1e-10;

/// Euclidean projection of `y` onto `{x : ‖x‖₁ ≤ radius}`.
pub fn project_l1_ball<T: Real>(y: &[T], radius: T) -> Vec<T> {
    let total = y.iter().fold(T::zero(), |a, v| a + v.abs());
    if total <= radius {
        return y.to_vec();
    }
    let mut mags: Vec<T> = y.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (i, &m) in mags.iter().enumerate() {
        cum += m;
        let cand = (cum - radius) / lit::<T>((i + 1) as f64);
        if m > cand {
            theta = cand;
        } else {
            break;
        }
    }
    y.iter()
        .map(|&v| {
            let a = v.abs() - theta;
            if a > T::zero() {
                a * v.signum()
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Largest index `i` (1-based) with `σ_i > (Σ_{j≤i} σ_j − 1)/i` (`strict`) or
/// `σ_i ≥ …` (inclusive), compared with an absolute band; inside the band the
/// strict test is false and the inclusive test true.
pub fn threshold_index<T: Real>(sigma: &[T], strict: bool) -> usize {
    let tol = lit::<T>(THRESHOLD_TOL);
    let mut cum = T::zero();
    let mut best = 0;
    for (i, &s) in sigma.iter().enumerate() {
        cum += s;
        let theta = (cum - T::one()) / lit::<T>((i + 1) as f64);
        let gap = s - theta;
        let ok = if strict { gap > tol } else { gap >= -tol };
        if ok {
            best = i + 1;
        }
    }
    best
}

/// Threshold indices and projection for a sorted singular-value vector with
/// `‖σ‖₁ > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralThresholds<T: Real> {
    pub k1: usize,
    pub k2: usize,
    pub p: DVector<T>,
}

pub fn spectral_thresholds<T: Real>(sigma: &DVector<T>) -> Result<SpectralThresholds<T>> {
    let total = sigma.iter().fold(T::zero(), |a, &v| a + v);
    if total <= T::one() {
        return Err(Error::NotCaseThree(crate::to_f64(total)));
    }
    if sigma.iter().any(|&v| v < T::zero()) || sigma.as_slice().windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter("singular values must be nonnegative and nonincreasing".into()));
    }
    let s = sigma.as_slice();
    let k1 = threshold_index(s, true);
    let k2 = threshold_index(s, false).max(k1);
    let p = DVector::from_vec(project_l1_ball(s, T::one()));
    Ok(SpectralThresholds { k1, k2, p })
}

/// Active piece of the unit-ball projection on a sorted nonnegative vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallPiece {
    /// `‖y‖₁ ≤ 1`: the projection is the identity.
    Inside,
    /// Outside the ball with the first `s` coordinates positive.
    Outside(usize),
}

impl BallPiece {
    /// Jacobian of the projection on this piece.
    pub fn jacobian<T: Real>(self, n: usize) -> DMatrix<T> {
        match self {
            BallPiece::Inside => DMatrix::identity(n, n),
            BallPiece::Outside(s) => {
                let mut j = DMatrix::zeros(n, n);
                let inv = T::one() / lit::<T>(s as f64);
                for a in 0..s {
                    for b in 0..s {
                        j[(a, b)] = if a == b { T::one() - inv } else { -inv };
                    }
                }
                j
            }
        }
    }
}

/// Piece reached from `y + εμ` as `ε ↓ 0` (lexicographic comparison). Within
/// ties `μ` must be sorted in the same order as `y`.
pub fn lexicographic_piece<T: Real>(y: &[T], mu: &[T]) -> BallPiece {
    let tol = lit::<T>(THRESHOLD_TOL);
    let s0 = y.iter().fold(T::zero(), |a, &v| a + v) - T::one();
    let s1 = mu.iter().fold(T::zero(), |a, &v| a + v);
    if s0 < -tol || (s0 <= tol && s1 <= T::zero()) {
        return BallPiece::Inside;
    }
    let (mut c0, mut c1) = (T::zero(), T::zero());
    let mut best = 1;
    for i in 0..y.len() {
        c0 += y[i];
        c1 += mu[i];
        let k = lit::<T>((i + 1) as f64);
        let g0 = y[i] - (c0 - T::one()) / k;
        let g1 = mu[i] - c1 / k;
        if g0 > tol || (g0 >= -tol && g1 > T::zero()) {
            best = i + 1;
        }
    }
    BallPiece::Outside(best)
}

/// Prox of `t‖·‖_∞` on a nonnegative vector: clips the largest entries to a
/// common level `λ` with `Σ (y_i − λ)_+ = t`.
pub fn clip_top<T: Real>(y: &[T], t: T) -> Vec<T> {
    let total = y.iter().fold(T::zero(), |a, &v| a + v);
    if total <= t {
        return vec![T::zero(); y.len()];
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    let mut level = T::zero();
    for k in 0..sorted.len() {
        cum += sorted[k];
        let cand = (cum - t) / lit::<T>((k + 1) as f64);
        let next = if k + 1 < sorted.len() { sorted[k + 1] } else { T::zero() };
        if cand >= next {
            level = cand;
            break;
        }
    }
    y.iter().map(|&v| v.min(level)).collect()
}
