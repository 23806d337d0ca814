//! Three fixture families: certified-stable, SSOSC-failing minimizers
//! (copositive but indefinite curvature on a weakly active face) and
//! nondegeneracy-failing instances (duplicated active constraints).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stabilis::linalg::{random_gaussian_vector, random_orthogonal};
use stabilis::{CatalogFunction, CatalogKind};

use crate::gen::{gauss, instance_from, random_catalog, random_symmetric, structured_point, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Stable,
    SsoscFailing,
    NondegeneracyFailing,
}

/// Positive definite Hessian, full-row-rank Jacobian, any catalog kind.
pub fn stable(k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(500 + k as u64);
    let kind = [CatalogKind::Orthant, CatalogKind::Soc, CatalogKind::Psd, CatalogKind::L1, CatalogKind::Nuclear][k % 5];
    let g = random_catalog(kind, &mut rng);
    let m = g.dim();
    let n = m + rng.random_range(0..=2);
    let a = DMatrix::from_fn(m, n, |_, _| gauss(&mut rng));
    let q = random_symmetric(n, 0.5, &mut rng);
    let z = structured_point(&g, &mut rng);
    let x = random_gaussian_vector::<f64, _>(n, &mut rng);
    instance_from(format!("stable-{k}-{kind}"), g, &z, a, q, x)
}

/// `R²₋`-type face of dimension `r ≥ 2` where `Q` has positive diagonal and
/// nonnegative off-diagonal entries large enough to be indefinite: copositive
/// on the critical cone, so a strict minimizer, yet SSOSC fails. Extra
/// strictly active and inactive coordinates and an orthogonal change of
/// variables hide the structure.
pub fn ssosc_failing(k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(700 + k as u64);
    let r = rng.random_range(2..=3);
    let extra = rng.random_range(0..=2);
    let m = r + extra;
    let mut q = DMatrix::identity(m, m);
    for i in 0..r {
        for j in (i + 1)..r {
            let v = rng.random_range(1.2..2.0);
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    let z = DVector::from_fn(m, |i, _| match i {
        _ if i < r => 0.0,
        _ if i % 2 == 0 => rng.random_range(0.5..1.5),
        _ => -rng.random_range(0.5..1.5),
    });
    let o = random_orthogonal::<f64, _>(m, &mut rng);
    let g = CatalogFunction::orthant(m);
    let x = random_gaussian_vector::<f64, _>(m, &mut rng);
    instance_from(format!("ssosc-failing-{k}"), g, &z, o.clone(), o.transpose() * q * o, x)
}

/// `F = [R; R]` for an orthogonal `R`, so each constraint appears twice;
/// at least one duplicated pair is active with positive multipliers.
pub fn nondegeneracy_failing(k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(900 + k as u64);
    let r = rng.random_range(1..=3);
    let y = DVector::from_fn(r, |i, _| if i == 0 || rng.random_bool(0.5) { 0.0 } else { -rng.random_range(0.3..1.0) });
    let mut z = DVector::zeros(2 * r);
    for i in 0..r {
        if y[i] < 0.0 {
            z[i] = y[i];
            z[r + i] = y[i];
        } else {
            z[i] = rng.random_range(0.3..1.5);
            z[r + i] = rng.random_range(0.3..1.5);
        }
    }
    let o = random_orthogonal::<f64, _>(r, &mut rng);
    let mut a = DMatrix::zeros(2 * r, r);
    a.view_mut((0, 0), (r, r)).copy_from(&o);
    a.view_mut((r, 0), (r, r)).copy_from(&o);
    let q = random_symmetric(r, 0.5, &mut rng);
    let x = random_gaussian_vector::<f64, _>(r, &mut rng);
    let g = CatalogFunction::orthant(2 * r);
    // `instance_from` sets `f0 = Prox(z) − A x̄`; both copies of `y` agree, so
    // the duplicated rows stay identical.
    let mut inst = instance_from(format!("nondegeneracy-failing-{k}"), g, &z, a, q, x);
    inst.label = format!("{} (r = {r})", inst.label);
    inst
}

pub fn family(f: Family) -> Vec<Instance> {
    (0..10)
        .map(|k| match f {
            Family::Stable => stable(k),
            Family::SsoscFailing => ssosc_failing(k),
            Family::NondegeneracyFailing => nondegeneracy_failing(k),
        })
        .collect()
}
