//! The KKT residual map `Z`, its generalized-Jacobian elements, a damped
//! semismooth Newton solver and multiplier recovery.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::sigma_min;
use crate::model::{Perturbation, PrimalDualPair, ProblemSpec};
use crate::{lit, Error, Real, Result};

/// Relative residual below which `(x, u)` counts as a KKT pair.
pub const KKT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SolverParams<T: Real> {
    pub tol: T,
    pub max_iter: usize,
    pub armijo_c: T,
    pub step_halving_max: usize,
    pub jacobian_regularization: T,
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        SolverParams {
            tol: lit(1e-10),
            max_iter: 100,
            armijo_c: lit(1e-4),
            step_halving_max: 30,
            jacobian_regularization: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveTrace<T: Real> {
    /// `(‖Z‖ before the step, step length)` per iteration.
    pub iterates: Vec<(T, T)>,
    pub final_residual: T,
    pub converged: bool,
    /// Last ratio `‖Z_{k+1}‖/‖Z_k‖`.
    pub superlinear_ratio: Option<T>,
    /// All ratios `‖Z_{k+1}‖/‖Z_k‖`.
    pub ratios: Vec<T>,
    /// Iterations where `E(W̄)` was near singular and a ridge was added.
    pub regularized_steps: usize,
}

impl<T: Real> SolveTrace<T> {
    pub fn iterations(&self) -> usize {
        self.iterates.len()
    }
}

/// `Z(x,u) = (∇ₓL(x,u) − a; Prox_g(F(x)+b+u) − F(x) − b)`.
pub fn residual_z_perturbed<T: Real>(
    problem: &ProblemSpec<T>,
    pert: &Perturbation<T>,
    x: &DVector<T>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    let grad = problem.lagrangian_grad(x, u) - &pert.a;
    let fb = problem.f_value(x) + &pert.b;
    let second = problem.g.prox(&(&fb + u), T::one())? - fb;
    let mut out = DVector::zeros(problem.n + problem.m);
    out.rows_mut(0, problem.n).copy_from(&grad);
    out.rows_mut(problem.n, problem.m).copy_from(&second);
    Ok(out)
}

pub fn residual_z<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
    residual_z_perturbed(problem, &Perturbation::zero(problem.n, problem.m), x, u)
}

pub(crate) fn kkt_band<T: Real>(x: &DVector<T>, u: &DVector<T>) -> T {
    lit::<T>(KKT_TOL) * (T::one() + x.norm() + u.norm())
}

/// Fails with `NotKKT` when `‖Z(x,u)‖` exceeds the relative KKT tolerance.
pub fn ensure_kkt<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>) -> Result<T> {
    if x.len() != problem.n || u.len() != problem.m {
        return Err(Error::DimensionMismatch(format!(
            "pair has lengths ({}, {}), expected ({}, {})",
            x.len(),
            u.len(),
            problem.n,
            problem.m
        )));
    }
    let r = residual_z(problem, x, u)?.norm();
    if r > kkt_band(x, u) {
        Err(Error::NotKKT(crate::to_f64(r)))
    } else {
        Ok(r)
    }
}

/// `E(U) = [[∇²ₓₓL, ∇Fᵀ], [(U − I)∇F, U]]`.
pub fn jz_element<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, big_u: &DMatrix<T>) -> DMatrix<T> {
    let (n, m) = (problem.n, problem.m);
    let jf = problem.f_jacobian(x);
    let mut e = DMatrix::zeros(n + m, n + m);
    e.view_mut((0, 0), (n, n)).copy_from(&problem.lagrangian_hessian(x, u));
    e.view_mut((0, n), (n, m)).copy_from(&jf.transpose());
    e.view_mut((n, 0), (m, n)).copy_from(&((big_u - DMatrix::identity(m, m)) * &jf));
    e.view_mut((n, n), (m, m)).copy_from(big_u);
    e
}

fn split<T: Real>(w: &DVector<T>, n: usize, m: usize) -> (DVector<T>, DVector<T>) {
    (w.rows(0, n).into_owned(), w.rows(n, m).into_owned())
}

/// Solves `E Δ = rhs`, adding a ridge when `E` is numerically singular.
fn newton_direction<T: Real>(e: &DMatrix<T>, rhs: &DVector<T>, base_ridge: T) -> Result<(DVector<T>, bool)> {
    let k = e.nrows();
    let scale = e.norm().max(T::one());
    let singular = sigma_min(e) < lit::<T>(1e-12) * scale;
    let ridges: Vec<T> = if singular {
        vec![base_ridge.max(lit(1e-10)), lit(1e-8)]
    } else {
        vec![base_ridge]
    };
    for ridge in ridges {
        let reg = e + DMatrix::identity(k, k) * (ridge * scale);
        if let Some(d) = reg.lu().solve(rhs) {
            if d.iter().all(|v| v.is_finite()) {
                return Ok((d, singular));
            }
        }
    }
    Err(Error::LinearSolveFailure)
}

/// Semismooth Newton on `Z = 0` for the perturbed system; always returns the
/// best iterate together with its trace.
pub fn solve_kkt_traced<T: Real>(
    problem: &ProblemSpec<T>,
    pert: &Perturbation<T>,
    start: &PrimalDualPair<T>,
    params: &SolverParams<T>,
) -> Result<(PrimalDualPair<T>, SolveTrace<T>)> {
    let (n, m) = (problem.n, problem.m);
    let mut x = start.x.clone();
    let mut u = start.u.clone();
    let mut z = residual_z_perturbed(problem, pert, &x, &u)?;
    let mut r = z.norm();
    let mut trace = SolveTrace {
        iterates: Vec::new(),
        final_residual: r,
        converged: false,
        superlinear_ratio: None,
        ratios: Vec::new(),
        regularized_steps: 0,
    };
    let half = lit::<T>(0.5);
    for _ in 0..params.max_iter {
        if r <= params.tol {
            break;
        }
        let arg = problem.f_value(&x) + &pert.b + &u;
        let wbar = problem.g.prox_jacobian_basic(&arg)?;
        let e = jz_element(problem, &x, &u, &wbar);
        let (dir, regularized) = newton_direction(&e, &(-&z), params.jacobian_regularization)?;
        if regularized {
            trace.regularized_steps += 1;
        }
        let (dx, du) = split(&dir, n, m);
        let merit = half * r * r;
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=params.step_halving_max {
            let (xt, ut) = (&x + &dx * t, &u + &du * t);
            let zt = residual_z_perturbed(problem, pert, &xt, &ut)?;
            let rt = zt.norm();
            if half * rt * rt <= (T::one() - lit::<T>(2.0) * params.armijo_c * t) * merit {
                accepted = Some((xt, ut, zt, rt));
                break;
            }
            t *= half;
        }
        let Some((xt, ut, zt, rt)) = accepted else {
            break;
        };
        trace.iterates.push((r, t));
        trace.ratios.push(rt / r);
        x = xt;
        u = ut;
        z = zt;
        r = rt;
    }
    trace.final_residual = r;
    trace.converged = r <= params.tol;
    trace.superlinear_ratio = trace.ratios.last().copied();
    Ok((PrimalDualPair { x, u, residual_norm: r }, trace))
}

/// Semismooth Newton on `Z(x,u) = 0` at `(a,b) = (0,0)`.
pub fn solve_kkt<T: Real>(
    problem: &ProblemSpec<T>,
    start: &PrimalDualPair<T>,
    params: &SolverParams<T>,
) -> Result<(PrimalDualPair<T>, SolveTrace<T>)> {
    let (pair, trace) = solve_kkt_traced(problem, &Perturbation::zero(problem.n, problem.m), start, params)?;
    if !trace.converged {
        return Err(Error::MaxIterExceeded { residual: crate::to_f64(trace.final_residual) });
    }
    Ok((pair, trace))
}

/// Least-norm multiplier `u ∈ ∂g(F(x))` minimizing `‖∇h(x) + ∇F(x)ᵀu‖`,
/// found by Dykstra's alternating projections between the affine solution
/// set of the stationarity equation and `∂g(F(x))`. Returns `u` and its
/// residual `‖Z(x,u)‖`.
pub fn recover_multiplier<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>) -> Result<(DVector<T>, T)> {
    let m = problem.m;
    let fx = problem.f_value(x);
    let jt = problem.f_jacobian(x).transpose();
    let gh = problem.h_gradient(x);
    let pinv = jt
        .clone()
        .pseudo_inverse(lit(1e-12))
        .map_err(|_| Error::LinearSolveFailure)?;
    let affine = |u: &DVector<T>| -> DVector<T> { u - &pinv * (&jt * u + &gh) };
    let mut u = DVector::zeros(m);
    let mut p = DVector::zeros(m);
    let mut q = DVector::zeros(m);
    let tiny = lit::<T>(1e-15);
    for _ in 0..20_000 {
        let y = affine(&(&u + &p));
        p = &u + &p - &y;
        let next = problem.g.subgradient_project(&fx, &(&y + &q))?;
        q = &y + &q - &next;
        let moved = (&next - &u).norm() + (&next - &y).norm();
        u = next;
        if moved <= tiny * (T::one() + u.norm()) {
            break;
        }
    }
    let res = residual_z(problem, x, &u)?.norm();
    if res > kkt_band(x, &u) {
        return Err(Error::NoMultiplierFound(crate::to_f64(res)));
    }
    Ok((u, res))
}
