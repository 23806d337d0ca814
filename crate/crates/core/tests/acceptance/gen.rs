//! Random catalog points with deliberate degeneracies, and KKT instances
//! built backwards from a chosen primal-dual pair.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stabilis::encoding::{svec, vec_cm};
use stabilis::linalg::{random_gaussian_vector, random_orthogonal};
use stabilis::{Catalog64, CatalogFunction, CatalogKind, Problem64};

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    random_gaussian_vector::<f64, _>(1, rng)[0]
}

pub fn random_catalog(kind: CatalogKind, rng: &mut ChaCha8Rng) -> Catalog64 {
    let sigma = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let shape: Vec<usize> = match kind {
        CatalogKind::Orthant | CatalogKind::L1 => vec![rng.random_range(1..=5)],
        CatalogKind::Soc => vec![rng.random_range(2..=5)],
        CatalogKind::Psd => vec![rng.random_range(1..=3)],
        CatalogKind::Nuclear | CatalogKind::Spectral => vec![rng.random_range(1..=3), rng.random_range(1..=3)],
    };
    CatalogFunction::new(kind, &shape, sigma).unwrap()
}

/// `U diag(s) Vᵀ` with Haar-random `U`, `V`.
pub fn matrix_with_singular_values(p: usize, q: usize, s: &[f64], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let u = random_orthogonal::<f64, _>(p, rng);
    let v = random_orthogonal::<f64, _>(q, rng);
    let mut d = DMatrix::zeros(p, q);
    for (i, &si) in s.iter().enumerate().take(p.min(q)) {
        d[(i, i)] = si;
    }
    u * d * v.transpose()
}

/// Singular values whose ℓ1-ball projection at radius `w` lands on a tie:
/// some entries sit exactly at the threshold.
fn threshold_tied(r: usize, w: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lam = rng.random_range(0.2..1.5);
    let above = rng.random_range(1..=r);
    let weights: Vec<f64> = (0..above).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut s: Vec<f64> = weights.iter().map(|e| lam + w * e / total).collect();
    while s.len() < r {
        s.push(if rng.random_bool(0.6) { lam } else { lam * rng.random_range(0.0..1.0) });
    }
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// A prox argument; about two thirds of draws sit on a kink of the prox.
pub fn structured_point(g: &Catalog64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let m = g.dim();
    let generic = rng.random_bool(1.0 / 3.0);
    if generic {
        return random_gaussian_vector::<f64, _>(m, rng) * 1.5;
    }
    let w = g.sigma;
    match g.kind {
        CatalogKind::Orthant => DVector::from_fn(m, |_, _| if rng.random_bool(0.4) { 0.0 } else { gauss(rng) }),
        CatalogKind::L1 => DVector::from_fn(m, |_, _| match rng.random_range(0..4) {
            0 => w,
            1 => -w,
            2 => 0.0,
            _ => 2.0 * gauss(rng),
        }),
        CatalogKind::Soc => {
            let y = random_gaussian_vector::<f64, _>(m - 1, rng);
            let t = match rng.random_range(0..3) {
                0 => y.norm(),
                1 => -y.norm(),
                _ => return DVector::zeros(m),
            };
            DVector::from_fn(m, |i, _| if i == 0 { t } else { y[i - 1] })
        }
        CatalogKind::Psd => {
            let p = g.shape[0];
            let mut ev: Vec<f64> = Vec::with_capacity(p);
            for _ in 0..p {
                let e = match (rng.random_range(0..3), ev.last()) {
                    (0, _) => 0.0,
                    (1, Some(&prev)) => prev,
                    _ => gauss(rng),
                };
                ev.push(e);
            }
            let o = random_orthogonal::<f64, _>(p, rng);
            svec(&(&o * DMatrix::from_diagonal(&DVector::from_vec(ev)) * o.transpose()))
        }
        CatalogKind::Nuclear => {
            let (p, q) = (g.shape[0], g.shape[1]);
            let mut s: Vec<f64> = Vec::new();
            for _ in 0..p.min(q) {
                let e = match (rng.random_range(0..4), s.last()) {
                    (0, _) => w,
                    (1, _) => 0.0,
                    (2, Some(&prev)) => prev,
                    _ => 2.0 * gauss(rng).abs(),
                };
                s.push(e);
            }
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            vec_cm(&matrix_with_singular_values(p, q, &s, rng))
        }
        CatalogKind::Spectral => {
            let (p, q) = (g.shape[0], g.shape[1]);
            let r = p.min(q);
            let s = match rng.random_range(0..3) {
                0 => {
                    let raw: Vec<f64> = (0..r).map(|_| rng.random_range(0.0..1.0)).collect();
                    let total: f64 = raw.iter().sum::<f64>().max(1e-3);
                    raw.iter().map(|v| w * v / total).collect()
                }
                1 => threshold_tied(r, w, rng),
                _ => {
                    let mut s: Vec<f64> = (0..r).map(|_| w * rng.random_range(0.0..1.0) / r as f64).collect();
                    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    s
                }
            };
            vec_cm(&matrix_with_singular_values(p, q, &s, rng))
        }
    }
}

/// A problem instance with a known KKT pair.
pub struct Instance {
    pub label: String,
    pub problem: Problem64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
}

/// Builds `h(x) = ½xᵀQx + cᵀx`, `F(x) = Ax + f0` around `x̄` so that
/// `(x̄, z − Prox_g(z))` is a KKT pair with `F(x̄) = Prox_g(z)`.
pub fn instance_from(label: String, g: Catalog64, z: &DVector<f64>, a: DMatrix<f64>, q: DMatrix<f64>, x: DVector<f64>) -> Instance {
    let fx = g.prox(z, 1.0).unwrap();
    let u = z - &fx;
    let f0 = &fx - &a * &x;
    let c = -(&q * &x) - a.transpose() * &u;
    let problem = Problem64::quadratic(q, c, a, f0, g).unwrap();
    Instance { label, problem, x, u }
}

pub fn random_symmetric(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| gauss(rng));
    (&b * b.transpose()) / n as f64 + DMatrix::identity(n, n) * shift
}

/// Random instances over every catalog kind: Jacobians of varying rank
/// (occasionally with repeated rows) and Hessians that are sometimes
/// indefinite.
pub fn random_suite(count: usize, rng: &mut ChaCha8Rng) -> Vec<Instance> {
    (0..count)
        .map(|k| {
            let kind = CatalogKind::ALL[k % CatalogKind::ALL.len()];
            let g = random_catalog(kind, rng);
            let m = g.dim();
            let n = rng.random_range(1..=6);
            let mut a = DMatrix::from_fn(m, n, |_, _| gauss(rng));
            if m > 1 && rng.random_bool(0.2) {
                let row = a.row(0).into_owned();
                a.set_row(m - 1, &row);
            }
            let shift = if rng.random_bool(0.3) { -rng.random_range(0.0..0.6) } else { 0.1 };
            let q = random_symmetric(n, shift, rng);
            let z = structured_point(&g, rng);
            let x = random_gaussian_vector::<f64, _>(n, rng);
            instance_from(format!("suite-{k}-{kind}"), g, &z, a, q, x)
        })
        .collect()
}
