use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stabilis::linalg::{asymmetry, random_gaussian_vector, sym_eigen_desc};
use stabilis::CatalogKind;

use crate::gen::{random_catalog, structured_point};
use crate::Tally;

const POINTS: usize = 1000;

fn spectrum_ok(w: &DMatrix<f64>) -> Result<(), String> {
    if asymmetry(w) > 1e-9 {
        return Err(format!("asymmetric Jacobian ({:e})", asymmetry(w)));
    }
    let (ev, _) = sym_eigen_desc(w).map_err(|e| e.to_string())?;
    if ev.min() < -1e-9 || ev.max() > 1.0 + 1e-9 {
        return Err(format!("spectrum [{:e}, {}]", ev.min(), ev.max()));
    }
    Ok(())
}

fn one_point(kind: CatalogKind, k: usize) -> Tally {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1_000 * kind as u64 + k as u64);
    let g = random_catalog(kind, &mut rng);
    let z = structured_point(&g, &mut rng);
    let p = g.prox(&z, 1.0).unwrap();
    let moreau = (&p + g.prox_conj(&z).unwrap() - &z).norm();
    t.check(moreau <= 1e-10, || format!("{kind} Moreau residual {moreau:e}"));

    let w = if k % 2 == 0 {
        &z + random_gaussian_vector::<f64, _>(z.len(), &mut rng) * 1e-3
    } else {
        structured_point(&g, &mut rng)
    };
    let d = &p - g.prox(&w, 1.0).unwrap();
    let gap = d.dot(&(&z - &w)) - d.norm_squared();
    t.check(gap >= -1e-10 * (1.0 + (&z - &w).norm_squared()), || format!("{kind} firm nonexpansiveness gap {gap:e}"));

    for (label, jac) in [
        ("basic", g.prox_jacobian_basic(&z)),
        ("min", g.prox_jacobian_min(&z)),
        ("sample", g.prox_jacobian_sample(&z, k as u64)),
    ] {
        let res = jac.map_err(|e| e.to_string()).and_then(|j| spectrum_ok(&j));
        t.check(res.is_ok(), || format!("{kind} {label} Jacobian: {}", res.unwrap_err()));
    }
    t
}

pub fn criterion() -> Tally {
    let mut total = Tally::default();
    for kind in CatalogKind::ALL {
        let parts: Vec<Tally> = (0..POINTS).into_par_iter().map(|k| one_point(kind, k)).collect();
        parts.into_iter().for_each(|p| total.merge(p));
    }
    total
}
