use super::*;
use crate::catalog::{CatalogFunction, CatalogKind};
use crate::encoding::vec_cm;
use proptest::prelude::*;

fn v(d: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(d)
}

fn m(r: usize, c: usize, d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, d)
}

fn cfg() -> ConditionsConfig {
    ConditionsConfig::default()
}

fn quad(q: DMatrix<f64>, c: DVector<f64>, a: DMatrix<f64>, f0: DVector<f64>, g: CatalogFunction<f64>) -> ProblemSpec<f64> {
    ProblemSpec::quadratic(q, c, a, f0, g).unwrap()
}

/// `½‖x‖²` over `F = id`, `g = δ_{R²₋}`.
fn convex_orthant() -> ProblemSpec<f64> {
    quad(DMatrix::identity(2, 2), v(&[0.0, 0.0]), DMatrix::identity(2, 2), v(&[0.0, 0.0]), CatalogFunction::orthant(2))
}

/// `F(x) = (x, x)` into `R²₋` with linear term `c`.
fn doubled(c: f64) -> ProblemSpec<f64> {
    quad(m(1, 1, &[1.0]), v(&[c]), m(2, 1, &[1.0, 1.0]), v(&[0.0, 0.0]), CatalogFunction::orthant(2))
}

fn concave_scalar() -> ProblemSpec<f64> {
    quad(m(1, 1, &[-1.0]), v(&[0.0]), m(1, 1, &[1.0]), v(&[0.0]), CatalogFunction::orthant(1))
}

fn linear_scalar() -> ProblemSpec<f64> {
    quad(m(1, 1, &[0.0]), v(&[-1.0]), m(1, 1, &[1.0]), v(&[0.0]), CatalogFunction::orthant(1))
}

#[test]
fn verdict_band_rule() {
    let c = cfg();
    assert_eq!(ConditionVerdict::from_margin(1e-8, c.margin_band, "").status, ConditionStatus::Inconclusive);
    assert_eq!(ConditionVerdict::from_margin(-1e-8, c.margin_band, "").status, ConditionStatus::Inconclusive);
    assert_eq!(ConditionVerdict::from_margin(1e-6, c.margin_band, "").status, ConditionStatus::Holds);
    assert_eq!(ConditionVerdict::from_margin(-1e-6, c.margin_band, "").status, ConditionStatus::Fails);
}

#[test]
fn rcq_examples() {
    let a = m(2, 2, &[2.0, 0.0, 1.0, 1.0]);
    let p = quad(DMatrix::identity(2, 2), v(&[0.0, 0.0]), a.clone(), v(&[0.0, 0.0]), CatalogFunction::orthant(2));
    let r = check_rcq(&p, &v(&[0.0, 0.0]), &cfg()).unwrap();
    assert!(r.holds());
    assert!(r.margin >= a.singular_values().min() - 2e-6);

    let l1 = CatalogFunction::new(CatalogKind::L1, &[2], 1.0).unwrap();
    let p = quad(DMatrix::identity(2, 2), v(&[0.0, 0.0]), m(2, 2, &[1.0, 1.0, 1.0, 1.0]), v(&[0.0, 0.0]), l1);
    let r = check_rcq(&p, &v(&[0.0, 0.0]), &cfg()).unwrap();
    assert!(r.holds());
    assert_eq!(r.margin, VACUOUS_MARGIN);

    assert!(check_rcq(&doubled(0.0), &v(&[0.0]), &cfg()).unwrap().holds());
    assert!(matches!(check_rcq(&doubled(0.0), &v(&[1.0]), &cfg()), Err(Error::DomainViolation(_))));
}

#[test]
fn srcq_examples() {
    let c = cfg();
    assert!(check_srcq(&convex_orthant(), &v(&[0.0, 0.0]), &v(&[0.0, 0.0]), &c).unwrap().holds());
    assert!(check_srcq(&doubled(0.0), &v(&[0.0]), &v(&[0.0, 0.0]), &c).unwrap().holds());
    let flat = quad(m(1, 1, &[1.0]), v(&[0.0]), m(2, 1, &[1.0, 0.0]), v(&[0.0, 0.0]), CatalogFunction::orthant(2));
    let r = check_srcq(&flat, &v(&[0.0]), &v(&[0.0, 0.0]), &c).unwrap();
    assert!(r.fails(), "{r:?}");
    assert!(matches!(check_srcq(&linear_scalar(), &v(&[0.0]), &v(&[0.0]), &c), Err(Error::NotKKT(_))));
}

#[test]
fn srcq_without_projector() {
    let g = CatalogFunction::new(CatalogKind::Nuclear, &[2, 2], 1.0).unwrap();
    let b = vec_cm(&m(2, 2, &[0.5, 0.0, 0.0, 0.2]));
    let p = quad(DMatrix::identity(4, 4), -b.clone(), DMatrix::identity(4, 4), DVector::zeros(4), g.clone());
    let r = check_srcq(&p, &DVector::zeros(4), &b, &cfg()).unwrap();
    assert!(r.holds(), "{r:?}");
    assert!(r.detail.contains("nondegeneracy"));

    let col = DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 1.0]);
    let c = -(col.transpose() * &b);
    let thin = quad(DMatrix::identity(1, 1), c, col, DVector::zeros(4), g);
    let r = check_srcq(&thin, &DVector::zeros(1), &b, &cfg()).unwrap();
    assert_eq!(r.status, ConditionStatus::Inconclusive);
    assert!(r.detail.contains("no projector"));
}

#[test]
fn nondegeneracy_examples() {
    let c = cfg();
    let r = check_nondegeneracy(&convex_orthant(), &v(&[0.0, 0.0]), &v(&[0.0, 0.0]), &c).unwrap();
    assert!(r.holds() && r.margin >= 1.0 - 2e-6);
    let r = check_nondegeneracy(&doubled(-2.0), &v(&[0.0]), &v(&[1.0, 1.0]), &c).unwrap();
    assert!(r.fails());
    let inactive = quad(m(1, 1, &[1.0]), v(&[0.0]), m(2, 1, &[0.0, 0.0]), v(&[-1.0, -1.0]), CatalogFunction::orthant(2));
    assert!(check_nondegeneracy(&inactive, &v(&[0.0]), &v(&[0.0, 0.0]), &c).unwrap().holds());
}

#[test]
fn soqc_examples() {
    let c = cfg();
    assert!(check_soqc(&convex_orthant(), &v(&[0.0, 0.0]), &v(&[0.0, 0.0]), &c).unwrap().holds());
    assert!(check_soqc(&doubled(-2.0), &v(&[0.0]), &v(&[1.0, 1.0]), &c).unwrap().fails());
    let r = check_soqc(&linear_scalar(), &v(&[0.0]), &v(&[1.0]), &c).unwrap();
    assert!(r.holds());
    assert!(r.detail.contains("clean"), "{}", r.detail);
}

fn single(u: &DVector<f64>) -> MultiplierSet<f64> {
    MultiplierSet { unique: true, candidates: vec![u.clone()] }
}

#[test]
fn sosc_examples() {
    let c = cfg();
    let zero2 = v(&[0.0, 0.0]);
    let r = check_sosc(&convex_orthant(), &zero2, &single(&zero2), &c).unwrap();
    assert!(r.holds() && (r.margin - 1.0).abs() < 1e-9, "{r:?}");
    let r = check_sosc(&concave_scalar(), &v(&[0.0]), &single(&v(&[0.0])), &c).unwrap();
    assert!(r.fails() && (r.margin + 1.0).abs() < 1e-9, "{r:?}");
    let r = check_sosc(&linear_scalar(), &v(&[0.0]), &single(&v(&[1.0])), &c).unwrap();
    assert!(r.holds() && r.margin == VACUOUS_MARGIN);
}

/// On `R²₋` with `H = [[1, 2], [2, 1]]` the critical cone is the orthant
/// itself, where `q ≥ 0`, yet `H` is indefinite on its span.
#[test]
fn sosc_sees_the_cone_and_ssosc_the_span() {
    let p = quad(m(2, 2, &[1.0, 2.0, 2.0, 1.0]), v(&[0.0, 0.0]), DMatrix::identity(2, 2), v(&[0.0, 0.0]), CatalogFunction::orthant(2));
    let z = v(&[0.0, 0.0]);
    let sosc = check_sosc(&p, &z, &single(&z), &cfg()).unwrap();
    assert!(sosc.holds() && (sosc.margin - 1.0).abs() < 1e-6, "{sosc:?}");
    let ssosc = check_ssosc(&p, &z, &single(&z), &cfg()).unwrap();
    assert!(ssosc.fails() && (ssosc.margin + 1.0).abs() < 1e-9);
    let jz = check_jz_nonsingular(&p, &z, &z, 16, &cfg()).unwrap();
    assert!(jz.fails(), "{jz:?}");
}

#[test]
fn ssosc_examples() {
    let c = cfg();
    let zero2 = v(&[0.0, 0.0]);
    let r = check_ssosc(&convex_orthant(), &zero2, &single(&zero2), &c).unwrap();
    assert!(r.holds() && (r.margin - 1.0).abs() < 1e-12);
    let r = check_ssosc(&concave_scalar(), &v(&[0.0]), &single(&v(&[0.0])), &c).unwrap();
    assert!(r.fails() && (r.margin + 1.0).abs() < 1e-12);
    let r = check_ssosc(&linear_scalar(), &v(&[0.0]), &single(&v(&[1.0])), &c).unwrap();
    assert_eq!(r.margin, VACUOUS_MARGIN);

    let g = CatalogFunction::new(CatalogKind::Spectral, &[2, 2], 1.0).unwrap();
    let a = vec_cm(&m(2, 2, &[0.3, 0.1, 0.0, 0.2]));
    let p = quad(-DMatrix::identity(4, 4), -a.clone(), DMatrix::identity(4, 4), DVector::zeros(4), g);
    let r = check_ssosc(&p, &DVector::zeros(4), &single(&a), &c).unwrap();
    assert!(r.holds());
}

#[test]
fn jz_examples() {
    let c = cfg();
    let r = check_jz_nonsingular(&linear_scalar(), &v(&[0.0]), &v(&[1.0]), 16, &c).unwrap();
    assert!(r.holds() && (r.margin - (1.0 - RANK_TOL)).abs() < 1e-12);
    let zero2 = v(&[0.0, 0.0]);
    assert!(check_jz_nonsingular(&convex_orthant(), &zero2, &zero2, 16, &c).unwrap().holds());
}

/// At the maximizer both B-elements give a nonsingular `E(U)`, but
/// `U = ½` in their convex hull does not: `det E(t) = 1 − 2t`.
#[test]
fn jz_at_the_maximizer_finds_the_singular_combination() {
    let p = concave_scalar();
    let (x, u) = (v(&[0.0]), v(&[0.0]));
    for t in [0.0, 1.0] {
        let e = crate::solver::jz_element(&p, &x, &u, &m(1, 1, &[t]));
        assert!(e.determinant().abs() > 0.5);
    }
    let r = check_jz_nonsingular(&p, &x, &u, 16, &cfg()).unwrap();
    assert!(r.fails(), "{r:?}");
}

#[test]
fn multipliers_of_the_doubled_constraint() {
    let p = doubled(-2.0);
    let set = multiplier_candidates(&p, &v(&[0.0]), &v(&[1.0, 1.0]), false, &cfg()).unwrap();
    assert!(!set.unique);
    let has = |t: &[f64]| set.candidates.iter().any(|c| (c - v(t)).norm() < 1e-6);
    assert!(has(&[2.0, 0.0]) && has(&[0.0, 2.0]) && has(&[1.0, 1.0]));
    let set = multiplier_candidates(&convex_orthant(), &v(&[0.0, 0.0]), &v(&[0.0, 0.0]), false, &cfg()).unwrap();
    assert!(set.unique);
}

#[test]
fn certify_convex_orthant() {
    let z = v(&[0.0, 0.0]);
    let cert = certify(&convex_orthant(), &z, &z, &cfg()).unwrap();
    for c in [&cert.rcq, &cert.srcq, &cert.nondegeneracy, &cert.soqc, &cert.sosc, &cert.ssosc, &cert.jz_nonsingular] {
        assert!(c.holds(), "{c:?}");
    }
    assert!(cert.consistency.values().all(|c| *c == ConsistencyOutcome::Pass));
    assert!(cert.multiplier_unique);
}

#[test]
fn certify_rank_deficient() {
    let cert = certify(&doubled(-2.0), &v(&[0.0]), &v(&[1.0, 1.0]), &cfg()).unwrap();
    assert!(cert.nondegeneracy.fails() && cert.soqc.fails());
    assert!(cert.consistent(), "{:?}", cert.consistency);
    assert!(!cert.multiplier_unique && cert.approximate);
}

#[test]
fn certify_at_the_maximizer() {
    let cert = certify(&concave_scalar(), &v(&[0.0]), &v(&[0.0]), &cfg()).unwrap();
    assert!(cert.soqc.holds() && cert.ssosc.fails() && cert.jz_nonsingular.fails());
    assert_eq!(cert.consistency["soqc_and_ssosc_iff_jz_nonsingular"], ConsistencyOutcome::Pass);
}

#[test]
fn certify_rejects_non_kkt() {
    assert!(matches!(certify(&linear_scalar(), &v(&[0.0]), &v(&[0.0]), &cfg()), Err(Error::NotKKT(_))));
}

#[test]
fn certificate_serializes() {
    let z = v(&[0.0, 0.0]);
    let cert = certify(&convex_orthant(), &z, &z, &cfg()).unwrap();
    let js = serde_json::to_value(&cert).unwrap();
    assert_eq!(js["ssosc"]["status"], "holds");
    assert_eq!(js["consistency"]["nondegeneracy_iff_soqc"], "pass");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn statuses_are_scale_invariant(d1 in 0.5..2.0f64, d2 in 0.5..2.0f64, c1 in -2.0..2.0f64, t in 0.5..2.0f64) {
        let make = |s: f64| quad(
            m(2, 2, &[d1 * s, 0.0, 0.0, d2 * s]),
            v(&[c1 * s, -s]),
            DMatrix::identity(2, 2),
            v(&[0.0, 0.0]),
            CatalogFunction::orthant(2),
        );
        let p1 = make(1.0);
        let x = v(&[(-c1 / d1).min(0.0), 0.0]);
        let u = -(p1.h_gradient(&x));
        let pt = make(t);
        let a = certify(&p1, &x, &u, &cfg()).unwrap();
        let b = certify(&pt, &x, &(&u * t), &cfg()).unwrap();
        prop_assert_eq!(a.soqc.status, a.nondegeneracy.status);
        for (l, r) in [(&a.soqc, &b.soqc), (&a.ssosc, &b.ssosc), (&a.sosc, &b.sosc), (&a.jz_nonsingular, &b.jz_nonsingular)] {
            prop_assert_eq!(l.status, r.status);
        }
    }
}
