use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{fmt_e, ConditionVerdict, ConditionsConfig};
use crate::catalog::RANGE_TOL;
use crate::linalg::{null_basis, random_gaussian_vector, sym_eigen_desc, RetainedEigen};
use crate::model::ProblemSpec;
use crate::second_order::{critical_cone, preimage_basis, reduced_ssosc_matrix};
use crate::solver::{ensure_kkt, recover_multiplier};
use crate::{lit, Real, Result};

const EXTREME_SAMPLES: usize = 16;
const MEMBERSHIP_TOL: f64 = 1e-7;
const REFINE_STEPS: usize = 40;

/// Multipliers over which the curvature conditions take their supremum.
#[derive(Debug, Clone)]
pub struct MultiplierSet<T: Real> {
    pub unique: bool,
    pub candidates: Vec<DVector<T>>,
}

/// Largest `t ≤ t_cap` with `u + t·dir ∈ ∂g(F(x))`, assuming `t = 0` works.
fn extreme_step<T: Real>(problem: &ProblemSpec<T>, fx: &DVector<T>, u: &DVector<T>, dir: &DVector<T>) -> Result<T> {
    let inside = |t: T| problem.g.subdifferential_contains(fx, &(u + dir * t), lit(1e-9));
    let mut lo = T::zero();
    let mut hi = lit::<T>(1e-3) * (T::one() + u.norm());
    let cap = lit::<T>(1e6) * (T::one() + u.norm());
    while inside(hi)? {
        lo = hi;
        hi *= lit(4.0);
        if hi > cap {
            return Ok(lo);
        }
    }
    for _ in 0..60 {
        let mid = (lo + hi) * lit(0.5);
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// The multiplier set at a KKT point. Nondegeneracy makes `u` the only
/// multiplier; otherwise directions of `ker ∇Fᵀ` are searched for further
/// multipliers and the extreme points found join the least-norm one.
pub fn multiplier_candidates<T: Real>(
    problem: &ProblemSpec<T>,
    x: &DVector<T>,
    u: &DVector<T>,
    nondegenerate: bool,
    cfg: &ConditionsConfig,
) -> Result<MultiplierSet<T>> {
    let single = MultiplierSet { unique: true, candidates: vec![u.clone()] };
    if nondegenerate {
        return Ok(single);
    }
    let jt = problem.f_jacobian(x).transpose();
    let ker = null_basis(&jt, lit(RANGE_TOL), lit(1e-12));
    if ker.ncols() == 0 {
        return Ok(single);
    }
    let fx = problem.f_value(x);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dirs: Vec<DVector<T>> = Vec::new();
    for i in 0..ker.ncols() {
        dirs.push(ker.column(i).into_owned());
        dirs.push(-ker.column(i));
    }
    while dirs.len() < EXTREME_SAMPLES {
        let c = random_gaussian_vector::<T, _>(ker.ncols(), &mut rng);
        let d = &ker * c;
        dirs.push(&d / d.norm());
    }
    dirs.truncate(EXTREME_SAMPLES);

    let mut candidates = vec![u.clone()];
    for dir in &dirs {
        let t = extreme_step(problem, &fx, u, dir)?;
        if t > lit::<T>(1e-6) * (T::one() + u.norm()) {
            candidates.push(u + dir * t);
        }
    }
    let unique = candidates.len() == 1;
    if !unique {
        if let Ok((least, _)) = recover_multiplier(problem, x) {
            candidates.insert(1, least);
        }
    }
    Ok(MultiplierSet { unique, candidates })
}

fn detail_suffix<T: Real>(m: &MultiplierSet<T>) -> String {
    if m.unique {
        String::new()
    } else {
        format!("; approximate sup over {} multipliers", m.candidates.len())
    }
}

/// `λ_min(H_red)` per multiplier, maximized over the candidate set.
pub fn check_ssosc<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, mults: &MultiplierSet<T>, cfg: &ConditionsConfig) -> Result<ConditionVerdict<T>> {
    let mut best: Option<(T, usize)> = None;
    for u in &mults.candidates {
        ensure_kkt(problem, x, u)?;
        let (b, h) = reduced_ssosc_matrix(problem, x, u)?;
        let margin = if b.ncols() == 0 { lit(super::VACUOUS_MARGIN) } else { sym_eigen_desc(&h)?.0.min() };
        if best.is_none_or(|(m, _)| margin > m) {
            best = Some((margin, b.ncols()));
        }
    }
    let (margin, k) = best.expect("at least one multiplier");
    if k == 0 {
        return Ok(ConditionVerdict::vacuous(format!("empty test subspace{}", detail_suffix(mults))));
    }
    Ok(ConditionVerdict::from_margin(
        margin,
        cfg.margin_band,
        format!("lambda_min(H_red) = {} on a {k}-dimensional subspace{}", fmt_e(margin), detail_suffix(mults)),
    ))
}

/// Minimum of `q(d) = ⟨H d, d⟩` over unit critical directions found by
/// sampling, with `H = ∇²ₓₓL + ∇Fᵀ(W̄† − I)∇F`.
fn sosc_single<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, cfg: &ConditionsConfig) -> Result<Option<T>> {
    let cc = critical_cone(problem, x, u)?;
    let b = &cc.basis_of_test_subspace;
    if b.ncols() == 0 {
        return Ok(None);
    }
    let jf = &cc.jacobian;
    let fx = problem.f_value(x);
    let w = problem.g.prox_jacobian_basic(&(&fx + u))?;
    let eig = RetainedEigen::new(&w, lit(RANGE_TOL))?;
    let h = problem.lagrangian_hessian(x, u) + jf.transpose() * eig.curvature_matrix() * jf;
    let q = |d: &DVector<T>| (&h * d).dot(d);
    let tol = lit::<T>(MEMBERSHIP_TOL);
    let feasible = |d: &DVector<T>| cc.contains(d, tol);
    let mut best: Option<T> = None;
    let mut record = |val: T| best = Some(best.map_or(val, |b: T| b.min(val)));

    let lin_basis = preimage_basis(jf, &(&cc.image_cone.lineality_basis * cc.image_cone.lineality_basis.transpose()));
    if lin_basis.ncols() > 0 {
        let red = lin_basis.transpose() * &h * &lin_basis;
        record(sym_eigen_desc(&crate::linalg::symmetrize(&red))?.0.min());
    }

    let pinv = jf.clone().pseudo_inverse(lit(1e-12)).unwrap_or_else(|_| DMatrix::zeros(jf.ncols(), jf.nrows()));
    let repair = |d: &DVector<T>| -> Option<DVector<T>> {
        let mut d = d.clone();
        for _ in 0..200 {
            let img = jf * &d;
            let target = cc.image_cone.project(&img)?;
            let gap = &target - &img;
            if gap.norm() <= lit::<T>(1e-12) * (T::one() + img.norm()) {
                break;
            }
            d += &pinv * gap;
        }
        let n = d.norm();
        (n > lit(1e-6)).then(|| d / n)
    };
    let unit = |d: DVector<T>| {
        let n = d.norm();
        (n > lit(1e-12)).then(|| d / n)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (_, vecs) = sym_eigen_desc(&crate::linalg::symmetrize(&(b.transpose() * &h * b)))?;
    let mut starts: Vec<DVector<T>> = (0..vecs.ncols()).rev().flat_map(|i| {
        let d = b * vecs.column(i);
        [d.clone(), -d]
    }).collect();
    while starts.len() < cfg.sosc_starts {
        starts.push(b * random_gaussian_vector::<T, _>(b.ncols(), &mut rng));
    }

    let has_proj = cc.image_cone.has_projector();
    let lip = h.norm().max(lit(1e-12));
    for s in starts {
        let start = if has_proj { repair(&s) } else { unit(s) };
        let Some(mut d) = start else { continue };
        if !feasible(&d) {
            continue;
        }
        let mut f = q(&d);
        if has_proj {
            for _ in 0..REFINE_STEPS {
                let grad = &h * &d;
                let mut moved = false;
                for step in [1.0, 0.25, 0.0625] {
                    if let Some(c) = repair(&(&d - &grad * (lit::<T>(step) / lip))) {
                        let fc = q(&c);
                        if fc < f - lit::<T>(1e-14) * (T::one() + f.abs()) && feasible(&c) {
                            d = c;
                            f = fc;
                            moved = true;
                            break;
                        }
                    }
                }
                if !moved {
                    break;
                }
            }
        }
        record(f);
    }
    Ok(best)
}

/// SOSC on the critical cone, maximized over the candidate multipliers.
/// A sampled certificate: any reported failure has a witness direction.
pub fn check_sosc<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, mults: &MultiplierSet<T>, cfg: &ConditionsConfig) -> Result<ConditionVerdict<T>> {
    let mut best: Option<Option<T>> = None;
    for u in &mults.candidates {
        let m = sosc_single(problem, x, u, cfg)?;
        best = Some(match (best, m) {
            (None, m) => m,
            (Some(None), _) | (Some(_), None) => None,
            (Some(Some(a)), Some(b)) => Some(a.max(b)),
        });
    }
    match best.flatten() {
        None => Ok(ConditionVerdict::vacuous(format!("no unit critical direction{}", detail_suffix(mults)))),
        Some(margin) => Ok(ConditionVerdict::from_margin(
            margin,
            cfg.margin_band,
            format!("sampled min of q over the critical cone = {}{}", fmt_e(margin), detail_suffix(mults)),
        )),
    }
}
