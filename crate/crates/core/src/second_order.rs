//! The second-order variational function `Γ_g`, two independent oracles for
//! it, the problem critical cone and the reduced SSOSC matrix.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{CatalogFunction, ConeDescription, RANGE_TOL, SUBGRAD_TOL};
use crate::linalg::{null_basis, random_unit_vector, svd_checked, symmetrize, RetainedEigen};
use crate::model::ProblemSpec;
use crate::solver::ensure_kkt;
use crate::{lit, Error, Real, Result};

/// Default step schedule of the second-subderivative oracle, scaled by `1 + ‖x‖`.
pub const TAU_SCHEDULE: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
/// Random directions added around `d` at each step size.
pub const NET_SIZE: usize = 8;
/// Ball radius of the curved-path search, in units of `τ(1 + ‖d‖)`.
pub const CURVED_RADIUS: f64 = 2.0;
const ELLIPSOID_ITERS_PER_DIM2: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaValue<T: Real> {
    /// `None` stands for `+∞`.
    pub value: Option<T>,
    pub in_domain: bool,
    pub witness_d: Option<DVector<T>>,
}

fn basic_eigen<T: Real>(g: &CatalogFunction<T>, x: &DVector<T>, mu: &DVector<T>) -> Result<RetainedEigen<T>> {
    if !g.subdifferential_contains(x, mu, lit(SUBGRAD_TOL))? {
        return Err(Error::NotASubgradient);
    }
    RetainedEigen::new(&g.prox_jacobian_basic(&(x + mu))?, lit(RANGE_TOL))
}

/// `Γ_g(x, μ)(v) = ⟨v, (W̄† − I) v⟩` on `rge W̄`, `+∞` elsewhere.
pub fn gamma<T: Real>(g: &CatalogFunction<T>, x: &DVector<T>, mu: &DVector<T>, v: &DVector<T>) -> Result<GammaValue<T>> {
    let eig = basic_eigen(g, x, mu)?;
    if eig.residual(v) > lit::<T>(RANGE_TOL) * (T::one() + v.norm()) {
        return Ok(GammaValue { value: None, in_domain: false, witness_d: None });
    }
    let coeffs = eig.vectors.transpose() * v;
    let value = coeffs
        .iter()
        .zip(eig.values.iter())
        .fold(T::zero(), |acc, (&c, &l)| acc + (T::one() / l - T::one()) * c * c);
    Ok(GammaValue { value: Some(value), in_domain: true, witness_d: Some(eig.pinv_apply(v)) })
}

/// `inf {⟨v, d − v⟩ : U d = v}` for one symmetric `U`: least squares through
/// the SVD, then a line search along `ker U` (unbounded below unless
/// `v ⊥ ker U`).
fn inner_min<T: Real>(u: &DMatrix<T>, v: &DVector<T>) -> Option<T> {
    let svd = svd_checked(u).ok()?;
    let smax = svd.singular_values.max();
    let cut = (smax * lit::<T>(RANGE_TOL)).max(lit(1e-14));
    let d = svd.solve(v, cut).ok()?;
    if (u * &d - v).norm() > lit::<T>(RANGE_TOL) * (T::one() + v.norm()) {
        return None;
    }
    let vt = svd.v_t.as_ref()?;
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] <= cut {
            let slope = vt.row(i).transpose().dot(v);
            if slope.abs() > lit::<T>(RANGE_TOL) * (T::one() + v.norm()) {
                return Some(-T::max_value().unwrap_or(lit(1e300)));
            }
        }
    }
    Some(v.dot(&d) - v.norm_squared())
}

/// Minimum of `⟨v, d − v⟩` over sampled `U ∈ 𝒥Prox_g(x + μ)` and `U d = v`;
/// `None` when no sample has `v` in its range.
pub fn gamma_bruteforce_oracle<T: Real>(
    g: &CatalogFunction<T>,
    x: &DVector<T>,
    mu: &DVector<T>,
    v: &DVector<T>,
    n_samples: usize,
    seed: u64,
) -> Result<Option<T>> {
    let z = x + mu;
    let mut best: Option<T> = None;
    for k in 0..n_samples {
        let u = g.prox_jacobian_sample(&z, seed.wrapping_mul(1_000_003).wrapping_add(k as u64))?;
        if let Some(val) = inner_min(&u, v) {
            best = Some(best.map_or(val, |b| b.min(val)));
        }
    }
    Ok(best)
}

/// Difference quotient `[g(x+τw) − g(x) − τ⟨μ,w⟩] / (½τ²)`.
fn quotient<T: Real>(g: &CatalogFunction<T>, x: &DVector<T>, gx: T, mu: &DVector<T>, w: &DVector<T>, tau: T) -> Result<Option<T>> {
    let gv = g.value(&(x + w * tau))?;
    Ok(gv.map(|val| (val - gx - tau * mu.dot(w)) / (lit::<T>(0.5) * tau * tau)))
}

/// Minimizes the (convex) quotient over `‖w − d‖ ≤ radius` by the ellipsoid
/// method; subgradients come from `∂g(x + τw)`. Finite `g` only.
fn curved_quotient_min<T: Real>(g: &CatalogFunction<T>, x: &DVector<T>, gx: T, mu: &DVector<T>, d: &DVector<T>, tau: T, radius: T) -> Result<Option<T>> {
    let m = d.len();
    let mut best = quotient(g, x, gx, mu, d, tau)?;
    let Some(mut lo) = best else { return Ok(None) };
    let mut c = d.clone();
    let mut p = DMatrix::<T>::identity(m, m) * (radius * radius);
    let mf = lit::<T>(m as f64);
    let max_iter = ELLIPSOID_ITERS_PER_DIM2 * (m + 1) * (m + 1);
    for _ in 0..max_iter {
        let off = &c - d;
        let h = if off.norm() > radius {
            off
        } else {
            let y = x + &c * tau;
            let xi = g.subgradient_project_sharp(&y, mu)?;
            if let Some(q) = quotient(g, x, gx, mu, &c, tau)? {
                lo = lo.min(q);
                best = Some(lo);
            }
            (xi - mu) * (lit::<T>(2.0) / tau)
        };
        let ph = &p * &h;
        let hph = h.dot(&ph);
        if !(hph > T::zero()) || hph.sqrt() <= lit::<T>(1e-11) * (T::one() + lo.abs()) {
            break;
        }
        let gt = &ph / hph.sqrt();
        if m == 1 {
            c -= &gt * lit::<T>(0.5);
            p *= lit::<T>(0.25);
            continue;
        }
        c -= &gt / (mf + T::one());
        p = (&p - &gt * gt.transpose() * (lit::<T>(2.0) / (mf + T::one()))) * (mf * mf / (mf * mf - T::one()));
    }
    Ok(best)
}

/// Approximates `d²g(x, μ)(d)` by second-order difference quotients around
/// `d`. For finite `g` the quotient is convex in the direction, and its
/// minimum over a ball of radius proportional to `τ` is taken, which admits
/// the curved paths `x + τd + ½τ²w`; for indicators a net of repaired
/// directions is used. Returns `None` (`+∞`) when every quotient diverges.
///
/// The finite quotients at the (up to three) smallest step sizes are
/// extrapolated polynomially to `τ = 0`; with fewer than two the smallest
/// observed quotient is returned.
pub fn second_subderivative_oracle<T: Real>(
    g: &CatalogFunction<T>,
    x: &DVector<T>,
    mu: &DVector<T>,
    d: &DVector<T>,
    tau_schedule: &[T],
    seed: u64,
) -> Result<Option<T>> {
    let gx = g.value(x)?.ok_or(Error::DomainViolation(f64::INFINITY))?;
    let scale = T::one() + x.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_tau: Vec<Option<T>> = Vec::with_capacity(tau_schedule.len());
    let mut taus = Vec::with_capacity(tau_schedule.len());
    for &t0 in tau_schedule {
        let tau = t0 * scale;
        if !g.kind.is_indicator() {
            let radius = tau * lit::<T>(CURVED_RADIUS) * (T::one() + d.norm());
            per_tau.push(curved_quotient_min(g, x, gx, mu, d, tau, radius)?);
            taus.push(tau);
            continue;
        }
        let radius = tau * tau * (T::one() + d.norm());
        let mut best: Option<T> = None;
        for k in 0..=NET_SIZE {
            let mut w = d.clone();
            if k > 0 {
                w += random_unit_vector::<T, _>(d.len(), &mut rng) * radius;
            }
            let repaired = (g.dom_project(&(x + &w * tau))? - x) / tau;
            if (&repaired - &w).norm() > tau.sqrt() * (T::one() + d.norm()) {
                continue;
            }
            w = repaired;
            if let Some(q) = quotient(g, x, gx, mu, &w, tau)? {
                best = Some(best.map_or(q, |b| b.min(q)));
            }
        }
        per_tau.push(best);
        taus.push(tau);
    }
    let tail: Vec<(T, T)> = taus.iter().zip(&per_tau).rev().map_while(|(&t, q)| q.map(|q| (t, q))).take(3).collect();
    if tail.len() >= 2 {
        return Ok(Some(extrapolate_to_zero(&tail)));
    }
    Ok(per_tau.into_iter().flatten().reduce(|a, b| a.min(b)))
}

/// Value at `τ = 0` of the polynomial through the given `(τ, q)` points.
fn extrapolate_to_zero<T: Real>(pts: &[(T, T)]) -> T {
    let mut acc = T::zero();
    for (i, &(ti, qi)) in pts.iter().enumerate() {
        let mut weight = T::one();
        for (j, &(tj, _)) in pts.iter().enumerate() {
            if i != j {
                weight *= tj / (tj - ti);
            }
        }
        acc += weight * qi;
    }
    acc
}

pub fn default_tau_schedule<T: Real>() -> Vec<T> {
    TAU_SCHEDULE.iter().map(|&t| lit(t)).collect()
}

/// The problem critical cone at a KKT pair: the test subspace
/// `S = {d : ∇F d ∈ rge W̄}` and a membership oracle for `𝒞(x̄)`.
#[derive(Debug, Clone)]
pub struct CriticalCone<T: Real> {
    pub basis_of_test_subspace: DMatrix<T>,
    pub multiplier: DVector<T>,
    pub jacobian: DMatrix<T>,
    pub image_cone: ConeDescription<T>,
}

impl<T: Real> CriticalCone<T> {
    pub fn contains(&self, d: &DVector<T>, tol: T) -> bool {
        self.image_cone.contains(&(&self.jacobian * d), tol)
    }

    pub fn dim(&self) -> usize {
        self.basis_of_test_subspace.ncols()
    }
}

/// Orthonormal basis of `{d : ∇F d ∈ rge W}` where `proj` projects onto `rge W`.
pub(crate) fn preimage_basis<T: Real>(jf: &DMatrix<T>, proj: &DMatrix<T>) -> DMatrix<T> {
    let m = jf.nrows();
    let off = (DMatrix::identity(m, m) - proj) * jf;
    null_basis(&off, lit(1e-10), lit(1e-10))
}

pub fn critical_cone<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>) -> Result<CriticalCone<T>> {
    ensure_kkt(problem, x, u)?;
    let fx = problem.f_value(x);
    let jf = problem.f_jacobian(x);
    let eig = RetainedEigen::new(&problem.g.prox_jacobian_basic(&(&fx + u))?, lit(RANGE_TOL))?;
    let basis = preimage_basis(&jf, &eig.projector());
    let image_cone = problem.g.critical_set(&fx, u)?;
    Ok(CriticalCone { basis_of_test_subspace: basis, multiplier: u.clone(), jacobian: jf, image_cone })
}

/// `H_red = Bᵀ(∇²ₓₓL + ∇Fᵀ(W̄† − I)∇F)B` over the test subspace.
pub fn reduced_ssosc_matrix<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    ensure_kkt(problem, x, u)?;
    let fx = problem.f_value(x);
    let jf = problem.f_jacobian(x);
    let eig = RetainedEigen::new(&problem.g.prox_jacobian_basic(&(&fx + u))?, lit(RANGE_TOL))?;
    let b = preimage_basis(&jf, &eig.projector());
    let full = problem.lagrangian_hessian(x, u) + jf.transpose() * eig.curvature_matrix() * &jf;
    let h = symmetrize(&(b.transpose() * full * &b));
    Ok((b, h))
}

/// `⟨∇²ₓₓL d, d⟩ + Γ(∇F d)`, `None` for `+∞`.
pub fn ssosc_form<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, d: &DVector<T>) -> Result<Option<T>> {
    let fx = problem.f_value(x);
    let gv = gamma(&problem.g, &fx, u, &(problem.f_jacobian(x) * d))?;
    Ok(gv.value.map(|v| (problem.lagrangian_hessian(x, u) * d).dot(d) + v))
}

pub mod spectral_example;
