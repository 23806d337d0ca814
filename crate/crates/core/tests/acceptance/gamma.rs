use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stabilis::conditions::{check_ssosc, MultiplierSet, VACUOUS_MARGIN};
use stabilis::encoding::vec_cm;
use stabilis::linalg::random_gaussian_vector;
use stabilis::second_order::spectral_example::{spectral_ssosc_margin, SpectralCase};
use stabilis::second_order::{critical_cone, default_tau_schedule, gamma, gamma_bruteforce_oracle, second_subderivative_oracle};
use stabilis::{Catalog64, CatalogFunction, CatalogKind, ConditionsConfig};

use crate::gen::{instance_from, matrix_with_singular_values, random_catalog, random_symmetric, structured_point};
use crate::Tally;

const TRIPLES: usize = 100;
const BRUTEFORCE_SAMPLES: usize = 64;

/// A direction in the critical cone: a lineality combination plus, for the
/// norms, a multiple of `x` (their critical cones contain `±x`), or the
/// projection of a random vector when a projector exists.
pub fn critical_direction(g: &Catalog64, x: &DVector<f64>, mu: &DVector<f64>, rng: &mut ChaCha8Rng) -> Option<DVector<f64>> {
    let cone = g.critical_set(x, mu).unwrap();
    let m = x.len();
    let w = random_gaussian_vector::<f64, _>(m, rng);
    if let Some(d) = cone.project(&w) {
        return Some(d);
    }
    let lin = &cone.lineality_basis;
    let mut d = lin * random_gaussian_vector::<f64, _>(lin.ncols(), rng);
    if !g.kind.is_indicator() {
        d += x * rng.random_range(-1.0..1.0);
    }
    cone.contains(&d, 1e-9).then_some(d)
}

pub fn one_triple(kind: CatalogKind, k: usize) -> Tally {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77_000 + 1_000 * kind as u64 + k as u64);
    let g = random_catalog(kind, &mut rng);
    let z = structured_point(&g, &mut rng);
    let x = g.prox(&z, 1.0).unwrap();
    let mu = &z - &x;

    let wbar = g.prox_jacobian_basic(&z).unwrap();
    let v = &wbar * random_gaussian_vector::<f64, _>(z.len(), &mut rng);
    let gv = gamma(&g, &x, &mu, &v).unwrap().value;
    t.check(gv.is_some(), || format!("{kind}: v in rge W̄ left the domain"));
    if let Some(gv) = gv {
        let bf = gamma_bruteforce_oracle(&g, &x, &mu, &v, BRUTEFORCE_SAMPLES, k as u64).unwrap();
        let ok = bf.is_some_and(|b| (b - gv).abs() <= 1e-8 * (1.0 + gv.abs()));
        t.check(ok, || format!("{kind}: gamma {gv} vs bruteforce {bf:?}"));
    }

    if let Some(d) = critical_direction(&g, &x, &mu, &mut rng) {
        let gd = gamma(&g, &x, &mu, &d).unwrap().value;
        let d2 = second_subderivative_oracle(&g, &x, &mu, &d, &default_tau_schedule(), k as u64).unwrap();
        let ok = match (gd, d2) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-4 * (1.0 + a.abs()),
            _ => false,
        };
        t.check(ok, || format!("{kind}: gamma {gd:?} vs second subderivative {d2:?} at |d| = {:.2}", d.norm()));
    }
    t
}

pub fn criterion_oracles() -> Tally {
    let mut total = Tally::default();
    for kind in CatalogKind::ALL {
        let parts: Vec<Tally> = (0..TRIPLES).into_par_iter().map(|k| one_triple(kind, k)).collect();
        parts.into_iter().for_each(|p| total.merge(p));
    }
    total
}

/// Singular values of `A` for the requested case at weight `w`.
fn case_values(case: SpectralCase, r: usize, w: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..r)
        .map(|i| if i > 0 && rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.1..1.0) })
        .collect();
    let total: f64 = raw.iter().sum();
    let target = match case {
        SpectralCase::Inside => w * rng.random_range(0.2..0.9),
        SpectralCase::Boundary => w,
        SpectralCase::Outside => w * rng.random_range(1.2..4.0),
    };
    let mut s: Vec<f64> = raw.iter().map(|v| v * target / total).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if case == SpectralCase::Outside && r > 1 && rng.random_bool(0.3) {
        s[1] = s[0];
    }
    s
}

fn one_spectral(k: usize) -> Tally {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31_000 + k as u64);
    let case = [SpectralCase::Inside, SpectralCase::Boundary, SpectralCase::Outside][k % 3];
    let (p, q) = (rng.random_range(1..=3), rng.random_range(1..=4));
    let w = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let g = CatalogFunction::new(CatalogKind::Spectral, &[p, q], w).unwrap();
    let a = vec_cm(&matrix_with_singular_values(p, q, &case_values(case, p.min(q), w, &mut rng), &mut rng));
    let m = p * q;
    let shift = -rng.random_range(0.0..1.0);
    let qm = random_symmetric(m, shift, &mut rng);
    let xbar = g.prox(&a, 1.0).unwrap();
    let inst = instance_from(format!("spectral-{k}"), g.clone(), &a, DMatrix::identity(m, m), qm, xbar);
    let (x, u) = (&inst.x, &inst.u);

    let (form, explicit) = spectral_ssosc_margin(&inst.problem, x, u).unwrap();
    t.check(form.case == case, || format!("{}: case {:?}, expected {case:?}", inst.label, form.case));
    let mults = MultiplierSet { unique: true, candidates: vec![u.clone()] };
    let generic = check_ssosc(&inst.problem, x, &mults, &ConditionsConfig::default()).unwrap().margin;
    let agree = match explicit {
        Some(e) => (e - generic).abs() <= 1e-8 * generic.abs().max(1.0),
        None => generic == VACUOUS_MARGIN,
    };
    t.check(agree, || format!("{}: explicit {explicit:?} vs generic {generic}", inst.label));

    match case {
        SpectralCase::Inside => {
            let dim = critical_cone(&inst.problem, x, u).unwrap().dim();
            t.check(dim == 0 && explicit.is_none(), || format!("{}: critical cone of dimension {dim}", inst.label));
        }
        SpectralCase::Boundary => {
            let form_norm = form.form.norm();
            t.check(form_norm <= 1e-9, || format!("{}: boundary form has norm {form_norm:e}", inst.label));
            let wbar = inst.problem.g.prox_jacobian_basic(&(&xbar_of(&inst) + u)).unwrap();
            let v = &wbar * random_gaussian_vector::<f64, _>(m, &mut rng);
            let gv = gamma(&inst.problem.g, &xbar_of(&inst), u, &v).unwrap().value;
            t.check(gv.is_some_and(|val| val.abs() <= 1e-9 * (1.0 + v.norm_squared())), || format!("{}: boundary gamma {gv:?}", inst.label));
        }
        SpectralCase::Outside => {}
    }
    t
}

fn xbar_of(inst: &crate::gen::Instance) -> DVector<f64> {
    inst.problem.f_value(&inst.x)
}

pub fn criterion_spectral() -> Tally {
    let mut total = Tally::default();
    let parts: Vec<Tally> = (0..50).into_par_iter().map(one_spectral).collect();
    parts.into_iter().for_each(|p| total.merge(p));
    total
}
