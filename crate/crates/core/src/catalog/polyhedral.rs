//! The nonpositive orthant indicator `δ_{R^m_-}` and the weighted ℓ1 norm
//! `σ‖·‖₁`. Both are separable, so every operation acts coordinatewise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Pick;
use crate::{Error, Real, Result};

fn pick_kink(pick: Pick, rng: &mut ChaCha8Rng) -> bool {
    match pick {
        Pick::Max => true,
        Pick::Min => false,
        Pick::Random => rng.random_bool(0.5),
    }
}

pub(super) mod orthant {
    use super::*;

    pub fn value<T: Real>(x: &DVector<T>, tol: T) -> Option<T> {
        if x.iter().all(|&xi| xi <= tol) {
            Some(T::zero())
        } else {
            None
        }
    }

    pub fn prox<T: Real>(z: &DVector<T>) -> DVector<T> {
        z.map(|v| v.min(T::zero()))
    }

    pub fn prox_conj<T: Real>(z: &DVector<T>) -> DVector<T> {
        z.map(|v| v.max(T::zero()))
    }

    pub fn b_element<T: Real>(z: &DVector<T>, tie: T, pick: Pick, rng: &mut ChaCha8Rng) -> DMatrix<T> {
        let diag = z.map(|v| {
            if v < -tie {
                T::one()
            } else if v > tie {
                T::zero()
            } else if pick_kink(pick, rng) {
                T::one()
            } else {
                T::zero()
            }
        });
        DMatrix::from_diagonal(&diag)
    }

    fn check_dom<T: Real>(x: &DVector<T>, tol: T) -> Result<()> {
        let worst = x.max();
        if worst > tol {
            Err(Error::DomainViolation(crate::to_f64(worst)))
        } else {
            Ok(())
        }
    }

    pub fn directional_deriv<T: Real>(x: &DVector<T>, d: &DVector<T>, act: T, tol: T) -> Result<Option<T>> {
        check_dom(x, tol)?;
        let band = tol * (T::one() + d.norm());
        let tangent = x.iter().zip(d.iter()).all(|(&xi, &di)| xi < -act || di <= band);
        Ok(tangent.then(T::zero))
    }

    pub fn dom_normal_project<T: Real>(x: &DVector<T>, v: &DVector<T>, act: T, tol: T) -> Result<DVector<T>> {
        check_dom(x, tol)?;
        Ok(DVector::from_iterator(
            x.len(),
            x.iter().zip(v.iter()).map(|(&xi, &vi)| if xi < -act { T::zero() } else { vi.max(T::zero()) }),
        ))
    }

    /// Projection onto the critical cone `T(x) ∩ u^⊥`.
    pub fn critical_project<T: Real>(x: &DVector<T>, u: &DVector<T>, act: T, d: &DVector<T>) -> DVector<T> {
        DVector::from_fn(d.len(), |i, _| {
            if x[i] < -act {
                d[i]
            } else if u[i] > act {
                T::zero()
            } else {
                d[i].min(T::zero())
            }
        })
    }
}

pub(super) mod l1 {
    use super::*;

    pub fn value<T: Real>(x: &DVector<T>, sigma: T) -> T {
        x.iter().fold(T::zero(), |acc, v| acc + v.abs()) * sigma
    }

    pub fn prox<T: Real>(z: &DVector<T>, thr: T) -> DVector<T> {
        z.map(|v| {
            let a = v.abs() - thr;
            if a > T::zero() {
                a * v.signum()
            } else {
                T::zero()
            }
        })
    }

    pub fn prox_conj<T: Real>(z: &DVector<T>, sigma: T) -> DVector<T> {
        z.map(|v| v.max(-sigma).min(sigma))
    }

    pub fn b_element<T: Real>(z: &DVector<T>, sigma: T, tie: T, pick: Pick, rng: &mut ChaCha8Rng) -> DMatrix<T> {
        let diag = z.map(|v| {
            let a = v.abs();
            if a > sigma + tie {
                T::one()
            } else if a < sigma - tie {
                T::zero()
            } else if pick_kink(pick, rng) {
                T::one()
            } else {
                T::zero()
            }
        });
        DMatrix::from_diagonal(&diag)
    }

    pub fn directional_deriv<T: Real>(x: &DVector<T>, d: &DVector<T>, sigma: T, act: T) -> T {
        x.iter().zip(d.iter()).fold(T::zero(), |acc, (&xi, &di)| {
            if xi.abs() > act {
                acc + di * xi.signum()
            } else {
                acc + di.abs()
            }
        }) * sigma
    }

    pub fn subgradient_project<T: Real>(x: &DVector<T>, w: &DVector<T>, sigma: T, act: T) -> DVector<T> {
        DVector::from_fn(x.len(), |i, _| {
            if x[i].abs() > act {
                sigma * x[i].signum()
            } else {
                w[i].max(-sigma).min(sigma)
            }
        })
    }

    pub fn critical_project<T: Real>(x: &DVector<T>, u: &DVector<T>, sigma: T, act: T, d: &DVector<T>) -> DVector<T> {
        DVector::from_fn(d.len(), |i, _| {
            if x[i].abs() > act {
                d[i]
            } else if u[i] >= sigma - act {
                d[i].max(T::zero())
            } else if u[i] <= -sigma + act {
                d[i].min(T::zero())
            } else {
                T::zero()
            }
        })
    }
}
