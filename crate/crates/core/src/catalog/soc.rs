//! Indicator of the second-order cone `K = {(t, v) : ‖v‖ ≤ t}`; the first
//! coordinate is the cone axis.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Pick;
use crate::linalg::random_unit_vector;
use crate::{lit, Error, Real, Result};

fn split<T: Real>(z: &DVector<T>) -> (T, DVector<T>) {
    (z[0], z.rows(1, z.len() - 1).into_owned())
}

fn join<T: Real>(t: T, v: &DVector<T>) -> DVector<T> {
    let mut out = DVector::zeros(v.len() + 1);
    out[0] = t;
    out.rows_mut(1, v.len()).copy_from(v);
    out
}

pub fn value<T: Real>(x: &DVector<T>, tol: T) -> Option<T> {
    let (t, v) = split(x);
    (v.norm() - t <= tol).then(T::zero)
}

pub fn project<T: Real>(z: &DVector<T>) -> DVector<T> {
    let (t, v) = split(z);
    let s = v.norm();
    if s <= t {
        z.clone()
    } else if s <= -t {
        DVector::zeros(z.len())
    } else {
        let c = (t + s) * lit(0.5);
        join(c, &(v * (c / s)))
    }
}

pub fn prox_conj<T: Real>(z: &DVector<T>) -> DVector<T> {
    -project(&(-z))
}

/// Jacobian of the projection on the region `|t| < ‖v‖` written with
/// `w = v/‖v‖` and `rho = t/‖v‖`; its one-sided limits give the kink elements.
fn outer_jacobian<T: Real>(w: &DVector<T>, rho: T) -> DMatrix<T> {
    let m = w.len() + 1;
    let half = lit::<T>(0.5);
    let mut j = DMatrix::zeros(m, m);
    j[(0, 0)] = half;
    for i in 0..w.len() {
        j[(0, i + 1)] = half * w[i];
        j[(i + 1, 0)] = half * w[i];
        for k in 0..w.len() {
            let id = if i == k { T::one() + rho } else { T::zero() };
            j[(i + 1, k + 1)] = half * (id - rho * w[i] * w[k]);
        }
    }
    j
}

pub fn b_element<T: Real>(z: &DVector<T>, tie: T, pick: Pick, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    let m = z.len();
    let (t, v) = split(z);
    let s = v.norm();
    let eye = DMatrix::identity(m, m);
    let zero = DMatrix::zeros(m, m);
    if z.norm() <= tie {
        return match pick {
            Pick::Max => eye,
            Pick::Min => zero,
            Pick::Random => match (rng.random_range(0..3), m > 1) {
                (0, _) => eye,
                (1, _) | (_, false) => zero,
                _ => {
                    let w = random_unit_vector::<T, _>(m - 1, rng);
                    let rho = lit::<T>(rng.random_range(-1.0..1.0));
                    outer_jacobian(&w, rho)
                }
            },
        };
    }
    if s < t - tie {
        return eye;
    }
    if s < -t - tie {
        return zero;
    }
    let w = &v / s;
    if (s - t).abs() <= tie {
        let take_identity = match pick {
            Pick::Max => true,
            Pick::Min => false,
            Pick::Random => rng.random_bool(0.5),
        };
        return if take_identity { eye } else { outer_jacobian(&w, T::one()) };
    }
    if (s + t).abs() <= tie {
        let take_zero = match pick {
            Pick::Max => false,
            Pick::Min => true,
            Pick::Random => rng.random_bool(0.5),
        };
        return if take_zero { zero } else { outer_jacobian(&w, -T::one()) };
    }
    outer_jacobian(&w, t / s)
}

fn check_dom<T: Real>(x: &DVector<T>, tol: T) -> Result<(T, DVector<T>, T)> {
    let (t, v) = split(x);
    let s = v.norm();
    if s - t > tol {
        return Err(Error::DomainViolation(crate::to_f64(s - t)));
    }
    Ok((t, v, s))
}

pub fn directional_deriv<T: Real>(x: &DVector<T>, d: &DVector<T>, act: T, tol: T) -> Result<Option<T>> {
    let (t, v, s) = check_dom(x, tol)?;
    let band = tol * (T::one() + d.norm());
    let (dt, dv) = split(d);
    let tangent = if x.norm() <= act {
        dv.norm() - dt <= band
    } else if s < t - act {
        true
    } else {
        (v / s).dot(&dv) - dt <= band
    };
    Ok(tangent.then(T::zero))
}

pub fn dom_normal_project<T: Real>(x: &DVector<T>, p: &DVector<T>, act: T, tol: T) -> Result<DVector<T>> {
    let (t, v, s) = check_dom(x, tol)?;
    if x.norm() <= act {
        return Ok(-project(&(-p)));
    }
    if s < t - act {
        return Ok(DVector::zeros(x.len()));
    }
    let n = join(-T::one(), &(v / s)) / lit::<T>(2.0).sqrt();
    Ok(&n * n.dot(p).max(T::zero()))
}

/// Projection onto the critical cone `T_K(x) ∩ u^⊥`, classified by `z = x + u`.
pub fn critical_project<T: Real>(z: &DVector<T>, tie: T, d: &DVector<T>) -> DVector<T> {
    let (t, v) = split(z);
    let s = v.norm();
    if z.norm() <= tie {
        return project(d);
    }
    if s < t - tie {
        return d.clone();
    }
    if s < -t - tie {
        return DVector::zeros(d.len());
    }
    let w = &v / s;
    if (s - t).abs() <= tie {
        let n = join(-T::one(), &w);
        let a = n.dot(d);
        return if a > T::zero() { d - n * (a / lit(2.0)) } else { d.clone() };
    }
    if (s + t).abs() <= tie {
        let r = join(T::one(), &w);
        let a = r.dot(d).max(T::zero());
        return r * (a / lit(2.0));
    }
    let n = join(-T::one(), &w);
    d - &n * (n.dot(d) / lit(2.0))
}
