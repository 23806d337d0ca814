use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{fmt_e, ConditionVerdict, ConditionsConfig, RANK_TOL};
use crate::catalog::Pick;
use crate::linalg::sigma_min;
use crate::model::ProblemSpec;
use crate::solver::{ensure_kkt, jz_element};
use crate::{lit, Real, Result};

const POOL_SIZE: usize = 8;
const GRID: usize = 64;
const GOLDEN_ITERS: usize = 40;

/// B-elements at `z`: `W̄`, `W_min` and distinct tie-perturbation samples.
fn b_pool<T: Real>(problem: &ProblemSpec<T>, z: &DVector<T>, seed: u64) -> Result<Vec<DMatrix<T>>> {
    let mut pool = vec![problem.g.prox_jacobian_basic(z)?, problem.g.prox_jacobian_min(z)?];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..4 * POOL_SIZE {
        if pool.len() >= POOL_SIZE {
            break;
        }
        let w = problem.g.b_element(z, Pick::Random, &mut rng)?;
        if pool.iter().all(|p| (p - &w).norm() > lit::<T>(1e-9)) {
            pool.push(w);
        }
    }
    Ok(pool)
}

/// Minimum of `σ_min(E(U))` along the segment between two elements: a grid
/// pass followed by golden-section refinement around the best grid point.
fn segment_min<T: Real>(sig: &dyn Fn(&DMatrix<T>) -> T, a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let at = |t: T| sig(&(a * (T::one() - t) + b * t));
    let step = T::one() / lit::<T>(GRID as f64);
    let mut best_k = 0;
    let mut best = at(T::zero());
    for k in 1..=GRID {
        let v = at(step * lit::<T>(k as f64));
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let mut lo = (step * lit::<T>(best_k as f64) - step).max(T::zero());
    let mut hi = (step * lit::<T>(best_k as f64) + step).min(T::one());
    let phi = lit::<T>(0.618_033_988_749_895);
    let mut c = hi - (hi - lo) * phi;
    let mut d = lo + (hi - lo) * phi;
    let (mut fc, mut fd) = (at(c), at(d));
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - (hi - lo) * phi;
            fc = at(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + (hi - lo) * phi;
            fd = at(d);
        }
    }
    best.min(fc).min(fd)
}

/// Smallest `σ_min(E(U))` found over `W̄`, `W_min`, `n_samples` seeded
/// Jacobian samples and segments between pooled B-elements.
pub fn jz_min_singular_value<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, n_samples: usize, seed: u64) -> Result<T> {
    let z = problem.f_value(x) + u;
    let sig = |big_u: &DMatrix<T>| sigma_min(&jz_element(problem, x, u, big_u));
    let pool = b_pool(problem, &z, seed)?;
    let mut best = pool.iter().map(sig).fold(T::max_value().unwrap_or(lit(1e300)), |a, b| a.min(b));
    for k in 0..n_samples {
        let w = problem.g.prox_jacobian_sample(&z, seed.wrapping_add(1000 + k as u64))?;
        best = best.min(sig(&w));
    }
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            best = best.min(segment_min(&sig, &pool[i], &pool[j]));
        }
    }
    Ok(best)
}

pub fn check_jz_nonsingular<T: Real>(
    problem: &ProblemSpec<T>,
    x: &DVector<T>,
    u: &DVector<T>,
    n_samples: usize,
    cfg: &ConditionsConfig,
) -> Result<ConditionVerdict<T>> {
    ensure_kkt(problem, x, u)?;
    let smin = jz_min_singular_value(problem, x, u, n_samples, cfg.seed)?;
    Ok(ConditionVerdict::from_margin(
        smin - lit(RANK_TOL),
        cfg.margin_band,
        format!("min sampled sigma_min(E(U)) = {}", fmt_e(smin)),
    ))
}
