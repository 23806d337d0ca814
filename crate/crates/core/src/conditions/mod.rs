//! Margin-reporting checks of the pointwise conditions and the aggregate
//! certificate with its consistency matrix.
//!
//! Every check returns a signed margin; the status is read off against a
//! band around zero so that borderline cases come out inconclusive.

mod cone_min;
mod curvature;
mod jacobian;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::catalog::RANGE_TOL;
use crate::linalg::{null_basis, surjectivity_margin};
use crate::model::ProblemSpec;
use crate::solver::ensure_kkt;
use crate::{lit, to_f64, Error, Real, Result};

pub use curvature::{check_sosc, check_ssosc, multiplier_candidates, MultiplierSet};
pub use jacobian::{check_jz_nonsingular, jz_min_singular_value};

/// Offset subtracted from singular-value margins, so that an exactly
/// rank-deficient matrix reports a negative margin instead of roundoff.
pub const RANK_TOL: f64 = 1e-6;
/// Margin reported when a condition holds vacuously.
pub const VACUOUS_MARGIN: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionStatus {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict<T: Real> {
    pub status: ConditionStatus,
    pub margin: T,
    pub detail: String,
}

impl<T: Real> ConditionVerdict<T> {
    pub fn from_margin(margin: T, band: f64, detail: impl Into<String>) -> Self {
        let status = if margin.abs() < lit(band) {
            ConditionStatus::Inconclusive
        } else if margin > T::zero() {
            ConditionStatus::Holds
        } else {
            ConditionStatus::Fails
        };
        Self { status, margin, detail: detail.into() }
    }

    pub fn vacuous(detail: impl Into<String>) -> Self {
        Self { status: ConditionStatus::Holds, margin: lit(VACUOUS_MARGIN), detail: detail.into() }
    }

    pub fn inconclusive(detail: impl Into<String>) -> Self {
        Self { status: ConditionStatus::Inconclusive, margin: T::zero(), detail: detail.into() }
    }

    pub fn holds(&self) -> bool {
        self.status == ConditionStatus::Holds
    }

    pub fn fails(&self) -> bool {
        self.status == ConditionStatus::Fails
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionsConfig {
    pub margin_band: f64,
    pub jz_samples: usize,
    pub soqc_samples: usize,
    pub sosc_starts: usize,
    pub seed: u64,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self { margin_band: 1e-7, jz_samples: 64, soqc_samples: 32, sosc_starts: 256, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyOutcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate<T: Real> {
    pub rcq: ConditionVerdict<T>,
    pub srcq: ConditionVerdict<T>,
    pub nondegeneracy: ConditionVerdict<T>,
    pub soqc: ConditionVerdict<T>,
    pub sosc: ConditionVerdict<T>,
    pub ssosc: ConditionVerdict<T>,
    pub jz_nonsingular: ConditionVerdict<T>,
    pub consistency: BTreeMap<String, ConsistencyOutcome>,
    pub multiplier_unique: bool,
    /// Set when SOSC/SSOSC were evaluated over a sampled multiplier set.
    pub approximate: bool,
    pub margin_band: f64,
}

impl<T: Real> Certificate<T> {
    pub fn consistent(&self) -> bool {
        self.consistency.values().all(|c| *c != ConsistencyOutcome::Fail)
    }

    /// SOQC and SSOSC both hold.
    pub fn certified_stable(&self) -> bool {
        self.soqc.holds() && self.ssosc.holds()
    }
}

fn fmt_e<T: Real>(v: T) -> String {
    format!("{:.3e}", to_f64(v))
}

/// `min ‖∇Fᵀv‖` over unit `v` in the normal cone to `dom g` at `F(x)`.
pub fn check_rcq<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, cfg: &ConditionsConfig) -> Result<ConditionVerdict<T>> {
    let fx = problem.f_value(x);
    if problem.g.value(&fx)?.is_none() {
        let viol = (problem.g.dom_project(&fx)? - &fx).norm();
        return Err(Error::DomainViolation(to_f64(viol)));
    }
    let jt = problem.f_jacobian(x).transpose();
    let g = &problem.g;
    let proj = |v: &DVector<T>| g.domain_normal_project(&fx, v);
    match cone_min::min_on_cone_sphere(&jt, &proj, cfg.seed)? {
        None => Ok(ConditionVerdict::vacuous("normal cone is {0}")),
        Some((val, v)) => Ok(ConditionVerdict::from_margin(
            val - lit(RANK_TOL),
            cfg.margin_band,
            format!("min |grad F^T v| = {} at v = {:?}", fmt_e(val), to_vec(&v)),
        )),
    }
}

/// Same dual test with the polar of the critical set `K(F(x), u)`.
pub fn check_srcq<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, cfg: &ConditionsConfig) -> Result<ConditionVerdict<T>> {
    ensure_kkt(problem, x, u)?;
    let fx = problem.f_value(x);
    let cone = problem.g.critical_set(&fx, u)?;
    if !cone.has_projector() {
        // Constraint nondegeneracy implies SRCQ.
        let nd = check_nondegeneracy(problem, x, u, cfg)?;
        if nd.holds() {
            return Ok(ConditionVerdict::from_margin(nd.margin, cfg.margin_band, format!("implied by nondegeneracy ({})", nd.detail)));
        }
        return Ok(ConditionVerdict::inconclusive("no projector; use isolated-calmness probe"));
    }
    let jt = problem.f_jacobian(x).transpose();
    let polar = |v: &DVector<T>| -> Result<DVector<T>> { Ok(v - cone.project(v).expect("projector present")) };
    match cone_min::min_on_cone_sphere(&jt, &polar, cfg.seed)? {
        None => Ok(ConditionVerdict::vacuous("polar of the critical set is {0}")),
        Some((val, v)) => Ok(ConditionVerdict::from_margin(
            val - lit(RANK_TOL),
            cfg.margin_band,
            format!("min |grad F^T v| = {} at v = {:?}", fmt_e(val), to_vec(&v)),
        )),
    }
}

/// `σ_m([∇F | L]) − RANK_TOL` with `L` spanning `lin K`.
pub fn check_nondegeneracy<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, cfg: &ConditionsConfig) -> Result<ConditionVerdict<T>> {
    ensure_kkt(problem, x, u)?;
    let fx = problem.f_value(x);
    let cone = problem.g.critical_set(&fx, u)?;
    let jf = problem.f_jacobian(x);
    let lin = &cone.lineality_basis;
    let m = problem.m;
    let mut stacked = DMatrix::zeros(m, jf.ncols() + lin.ncols());
    stacked.view_mut((0, 0), (m, jf.ncols())).copy_from(&jf);
    stacked.view_mut((0, jf.ncols()), (m, lin.ncols())).copy_from(lin);
    let sv = surjectivity_margin(&stacked);
    Ok(ConditionVerdict::from_margin(
        sv - lit(RANK_TOL),
        cfg.margin_band,
        format!("sigma_m([grad F | L]) = {}, dim lin K = {}", fmt_e(sv), lin.ncols()),
    ))
}

/// Copies the nondegeneracy verdict and cross-checks the necessary condition
/// `ker ∇Fᵀ ∩ ker U = {0}` on sampled Jacobian elements.
pub fn check_soqc<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, cfg: &ConditionsConfig) -> Result<ConditionVerdict<T>> {
    let nd = check_nondegeneracy(problem, x, u, cfg)?;
    let fx = problem.f_value(x);
    let z = &fx + u;
    let jt = problem.f_jacobian(x).transpose();
    let (n, m) = (jt.nrows(), jt.ncols());
    let mut offending = None;
    for k in 0..cfg.soqc_samples {
        let big_u = match k {
            0 => problem.g.prox_jacobian_basic(&z)?,
            1 => problem.g.prox_jacobian_min(&z)?,
            _ => problem.g.prox_jacobian_sample(&z, cfg.seed.wrapping_add(k as u64))?,
        };
        let mut stacked = DMatrix::zeros(n + m, m);
        stacked.view_mut((0, 0), (n, m)).copy_from(&jt);
        stacked.view_mut((n, 0), (m, m)).copy_from(&big_u);
        let ker = null_basis(&stacked, lit(RANGE_TOL), lit(1e-12));
        if ker.ncols() > 0 {
            offending = Some((k, ker.column(0).into_owned()));
            break;
        }
    }
    let mut detail = format!("from nondegeneracy: {}", nd.detail);
    match (&offending, nd.status) {
        (Some((k, v)), ConditionStatus::Holds) => {
            detail.push_str(&format!("; internal inconsistency: sample {k} has common kernel direction {:?}", to_vec(v)));
        }
        (Some((k, _)), _) => detail.push_str(&format!("; sample {k} confirms a common kernel direction")),
        (None, _) => detail.push_str(&format!("; kernel cross-check clean on {} samples", cfg.soqc_samples)),
    }
    Ok(ConditionVerdict { status: nd.status, margin: nd.margin, detail })
}

fn to_vec<T: Real>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|&c| to_f64(c)).collect()
}

fn implication<T: Real>(lhs: &[&ConditionVerdict<T>], rhs: &[&ConditionVerdict<T>], iff: bool) -> ConsistencyOutcome {
    let decided = |v: &&ConditionVerdict<T>| v.status != ConditionStatus::Inconclusive;
    if !lhs.iter().all(decided) || !rhs.iter().all(decided) {
        return ConsistencyOutcome::Inconclusive;
    }
    let l = lhs.iter().all(|v| v.holds());
    let r = rhs.iter().all(|v| v.holds());
    let ok = if iff { l == r } else { !l || r };
    if ok {
        ConsistencyOutcome::Pass
    } else {
        ConsistencyOutcome::Fail
    }
}

/// Runs every check and evaluates the consistency matrix.
pub fn certify<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, cfg: &ConditionsConfig) -> Result<Certificate<T>> {
    ensure_kkt(problem, x, u)?;
    let rcq = check_rcq(problem, x, cfg)?;
    let srcq = check_srcq(problem, x, u, cfg)?;
    let nondegeneracy = check_nondegeneracy(problem, x, u, cfg)?;
    let soqc = check_soqc(problem, x, u, cfg)?;
    let mults = multiplier_candidates(problem, x, u, nondegeneracy.holds(), cfg)?;
    let (curv, jz) = rayon::join(
        || -> Result<_> { Ok((check_sosc(problem, x, &mults, cfg)?, check_ssosc(problem, x, &mults, cfg)?)) },
        || check_jz_nonsingular(problem, x, u, cfg.jz_samples, cfg),
    );
    let (sosc, ssosc) = curv?;
    let jz_nonsingular = jz?;

    let mut consistency = BTreeMap::new();
    consistency.insert("soqc_and_ssosc_iff_jz_nonsingular".to_string(), implication(&[&soqc, &ssosc], &[&jz_nonsingular], true));
    consistency.insert("nondegeneracy_iff_soqc".to_string(), implication(&[&nondegeneracy], &[&soqc], true));
    consistency.insert("soqc_and_ssosc_implies_srcq_and_sosc".to_string(), implication(&[&soqc, &ssosc], &[&srcq, &sosc], false));

    Ok(Certificate {
        rcq,
        srcq,
        nondegeneracy,
        soqc,
        sosc,
        ssosc,
        jz_nonsingular,
        consistency,
        multiplier_unique: mults.unique,
        approximate: !mults.unique,
        margin_band: cfg.margin_band,
    })
}

#[cfg(test)]
mod tests;
