//! Empirical probes of the Aubin property, isolated calmness, strong
//! regularity and tilt stability: sample canonical perturbations, re-solve
//! the KKT system from several starts and measure how solutions move.
//!
//! Probes only ever report `consistent`, `violated` or `inconclusive`; a
//! `violated` verdict always carries a witness.

mod kinds;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::random_unit_vector;
use crate::model::{Perturbation, PrimalDualPair, ProblemSpec};
use crate::solver::{solve_kkt_traced, SolverParams};
use crate::{lit, to_f64, Real};

pub use kinds::{cross_reference_calmness, probe_aubin, probe_isolated_calmness, probe_strong_regularity, probe_tilt};

/// Fraction of unsolved samples tolerated before a probe gives up.
pub const MAX_FAILURE_RATE: f64 = 0.2;
/// Level-over-level growth of the modulus read as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;
/// Largest growth factor still read as bounded in the calmness probe.
pub const CALM_GROWTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeConfig {
    /// Perturbation radius; `None` means `1e-4·(1 + ‖x̄‖)`.
    pub radius: Option<f64>,
    pub n_samples: usize,
    pub n_starts: usize,
    pub n_directions: usize,
    pub shrink_levels: usize,
    pub shrink_factor: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { radius: None, n_samples: 200, n_starts: 8, n_directions: 8, shrink_levels: 5, shrink_factor: 0.25, seed: 0 }
    }
}

impl ProbeConfig {
    pub fn radius_at<T: Real>(&self, x: &DVector<T>) -> T {
        match self.radius {
            Some(r) => lit(r),
            None => lit::<T>(1e-4) * (T::one() + x.norm()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Aubin,
    IsolatedCalmness,
    StrongRegularity,
    Tilt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeVerdict {
    Consistent,
    Violated,
    Inconclusive,
}

/// A concrete observation behind a `violated` verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub reason: String,
    pub perturbation: Vec<f64>,
    pub other_perturbation: Option<Vec<f64>>,
    pub solutions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeDiagnostics {
    pub witness: Option<Witness>,
    pub level_moduli: Vec<f64>,
    pub failed_solves: usize,
    pub lost_solutions: usize,
    pub low_coverage: bool,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult<T: Real> {
    pub kind: ProbeKind,
    pub modulus_estimate: T,
    pub uniqueness_violations: usize,
    pub samples_used: usize,
    pub verdict: ProbeVerdict,
    pub diagnostics: ProbeDiagnostics,
}

pub(crate) fn flat<T: Real>(p: &Perturbation<T>) -> Vec<f64> {
    p.a.iter().chain(p.b.iter()).map(|&v| to_f64(v)).collect()
}

pub(crate) fn flat_pair<T: Real>(p: &PrimalDualPair<T>) -> Vec<f64> {
    p.x.iter().chain(p.u.iter()).map(|&v| to_f64(v)).collect()
}

pub(crate) fn sample_seed(base: u64, stream: u64, index: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index as u64)
}

/// A perturbation of norm at most `radius`; odd draws are pure tilts.
pub(crate) fn draw_perturbation<T: Real>(n: usize, m: usize, radius: T, tilt_only: bool, rng: &mut ChaCha8Rng) -> Perturbation<T> {
    use rand::Rng;
    let scale = radius * lit::<T>(rng.random_range(0.1..1.0));
    if tilt_only {
        return Perturbation { a: random_unit_vector::<T, _>(n, rng) * scale, b: DVector::zeros(m) };
    }
    let w = random_unit_vector::<T, _>(n + m, rng) * scale;
    Perturbation { a: w.rows(0, n).into_owned(), b: w.rows(n, m).into_owned() }
}

/// Starts around `center`: the center itself, then random offsets of size `spread`.
pub(crate) fn starts<T: Real>(center: &PrimalDualPair<T>, count: usize, spread: T, rng: &mut ChaCha8Rng) -> Vec<PrimalDualPair<T>> {
    let (n, m) = (center.x.len(), center.u.len());
    let mut out = vec![center.clone()];
    while out.len() < count.max(1) {
        let w = random_unit_vector::<T, _>(n + m, rng) * spread;
        out.push(PrimalDualPair::new(&center.x + w.rows(0, n), &center.u + w.rows(n, m)));
    }
    out
}

/// Converged solutions from every start, clustered at `distinct_tol` and
/// restricted to the ball of radius `loc` around `reference`.
pub(crate) struct Solved<T: Real> {
    pub solutions: Vec<PrimalDualPair<T>>,
    pub any_converged: bool,
    /// Smallest final residual over all starts.
    pub best_residual: T,
    /// Final iterates of every start, converged or not.
    pub endpoints: Vec<PrimalDualPair<T>>,
}

/// How a perturbed solve without a local solution is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Found,
    /// Converged only outside the localization ball, or every start stalled
    /// at a residual of the order of the perturbation.
    Lost,
    /// Stalled at a small residual: a numerical failure, not evidence.
    Failed,
}

impl<T: Real> Solved<T> {
    pub fn outcome(&self, pert_norm: T) -> Outcome {
        if !self.solutions.is_empty() {
            Outcome::Found
        } else if self.any_converged || self.best_residual > lit::<T>(1e-3) * pert_norm {
            Outcome::Lost
        } else {
            Outcome::Failed
        }
    }
}

pub(crate) fn solve_from<T: Real>(
    problem: &ProblemSpec<T>,
    pert: &Perturbation<T>,
    starts: &[PrimalDualPair<T>],
    reference: &PrimalDualPair<T>,
    loc: T,
    distinct_tol: T,
) -> Solved<T> {
    let params = SolverParams::<T>::default();
    let mut solutions: Vec<PrimalDualPair<T>> = Vec::new();
    let mut any_converged = false;
    let mut best_residual = T::max_value().unwrap_or(lit(1e300));
    let mut endpoints = Vec::with_capacity(starts.len());
    for s in starts {
        let Ok((pair, trace)) = solve_kkt_traced(problem, pert, s, &params) else { continue };
        best_residual = best_residual.min(trace.final_residual);
        endpoints.push(pair.clone());
        if !trace.converged {
            continue;
        }
        any_converged = true;
        if pair.distance(reference) > loc {
            continue;
        }
        if solutions.iter().all(|p| p.distance(&pair) > distinct_tol) {
            solutions.push(pair);
        }
    }
    Solved { solutions, any_converged, best_residual, endpoints }
}

/// Runs `f` on `0..count` in parallel with per-index seeds; output order is
/// the index order, so results do not depend on scheduling.
pub(crate) fn par_samples<R: Send, F>(count: usize, base: u64, stream: u64, f: F) -> Vec<R>
where
    F: Fn(usize, &mut ChaCha8Rng) -> R + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(base, stream, k));
            f(k, &mut rng)
        })
        .collect()
}
