use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    draw_perturbation, flat, flat_pair, par_samples, solve_from, starts, Outcome, ProbeConfig, ProbeDiagnostics, ProbeKind,
    ProbeResult, ProbeVerdict, Solved, Witness, CALM_GROWTH, DIVERGENCE_FACTOR, MAX_FAILURE_RATE,
};
use crate::conditions::Certificate;
use crate::linalg::random_unit_vector;
use crate::model::{Perturbation, PrimalDualPair, ProblemSpec};
use crate::{lit, to_f64, Error, Real, Result};

/// Localization ball, start spread and clustering threshold, all in units
/// of the perturbation radius.
const LOC: f64 = 500.0;
const SPREAD: f64 = 3.0;
const DISTINCT: f64 = 1e-3;
const LOW_COVERAGE_DIRECTIONS: usize = 4;

struct Tally {
    witness: Option<Witness>,
    failed: usize,
    lost: usize,
    uniqueness: usize,
}

impl Tally {
    fn new() -> Self {
        Self { witness: None, failed: 0, lost: 0, uniqueness: 0 }
    }

    fn witness(&mut self, w: Witness) {
        if self.witness.is_none() {
            self.witness = Some(w);
        }
    }

    fn lost<T: Real>(&mut self, pert: &Perturbation<T>, other: Option<&Perturbation<T>>) {
        self.lost += 1;
        self.witness(Witness {
            reason: "no solution near the reference point".into(),
            perturbation: flat(pert),
            other_perturbation: other.map(flat),
            solutions: Vec::new(),
        });
    }

    /// Records the outcome of one solve; returns whether solutions were found.
    fn record<T: Real>(&mut self, solved: &Solved<T>, pert: &Perturbation<T>, other: Option<&Perturbation<T>>) -> bool {
        match solved.outcome(pert.norm()) {
            Outcome::Found => true,
            Outcome::Lost => {
                self.lost(pert, other);
                false
            }
            Outcome::Failed => {
                self.failed += 1;
                false
            }
        }
    }

    /// Too many numerical failures with nothing else to show for them.
    fn check_failures(&self, total: usize) -> Result<()> {
        if self.witness.is_none() && (self.failed as f64) > MAX_FAILURE_RATE * total as f64 {
            return Err(Error::SolveFailuresExceeded { failed: self.failed, total });
        }
        Ok(())
    }
}

fn diagnostics<T: Real>(t: Tally, level_moduli: Vec<T>, low_coverage: bool, radius: T) -> ProbeDiagnostics {
    ProbeDiagnostics {
        witness: t.witness,
        level_moduli: level_moduli.into_iter().map(to_f64).collect(),
        failed_solves: t.failed,
        lost_solutions: t.lost,
        low_coverage,
        radius: to_f64(radius),
    }
}

fn degenerate<T: Real>(kind: ProbeKind, radius: T) -> ProbeResult<T> {
    ProbeResult {
        kind,
        modulus_estimate: T::zero(),
        uniqueness_violations: 0,
        samples_used: 0,
        verdict: ProbeVerdict::Inconclusive,
        diagnostics: diagnostics(Tally::new(), Vec::<T>::new(), true, radius),
    }
}

fn reference<T: Real>(x: &DVector<T>, u: &DVector<T>) -> PrimalDualPair<T> {
    PrimalDualPair::new(x.clone(), u.clone())
}

fn level_radius<T: Real>(cfg: &ProbeConfig, radius: T, level: usize) -> T {
    radius * lit::<T>(cfg.shrink_factor.powi(level as i32))
}

/// Solutions of randomly perturbed systems, with multistart uniqueness checks.
pub fn probe_strong_regularity<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, cfg: &ProbeConfig) -> Result<ProbeResult<T>> {
    let radius = cfg.radius_at(x);
    if radius <= T::zero() || cfg.n_samples == 0 {
        return Ok(degenerate(ProbeKind::StrongRegularity, radius));
    }
    let (n, m) = (problem.n, problem.m);
    let refp = reference(x, u);
    let runs = par_samples(cfg.n_samples, cfg.seed, 1, |k, rng| {
        let pert = draw_perturbation(n, m, radius, k % 2 == 1, rng);
        let st = starts(&refp, cfg.n_starts, radius * lit(SPREAD), rng);
        let solved = solve_from(problem, &pert, &st, &refp, radius * lit(LOC), radius * lit(DISTINCT));
        (pert, solved)
    });
    let mut tally = Tally::new();
    let mut modulus = T::zero();
    let mut used = 0;
    for (pert, solved) in &runs {
        if !tally.record(solved, pert, None) {
            continue;
        }
        used += 1;
        for s in &solved.solutions {
            modulus = modulus.max(s.distance(&refp) / pert.norm());
        }
        if solved.solutions.len() > 1 {
            tally.uniqueness += 1;
            tally.witness(Witness {
                reason: "distinct solutions from different starts".into(),
                perturbation: flat(pert),
                other_perturbation: None,
                solutions: solved.solutions.iter().map(flat_pair).collect(),
            });
        }
    }
    tally.check_failures(cfg.n_samples)?;
    let verdict = if tally.witness.is_some() { ProbeVerdict::Violated } else { ProbeVerdict::Consistent };
    Ok(ProbeResult {
        kind: ProbeKind::StrongRegularity,
        modulus_estimate: modulus,
        uniqueness_violations: tally.uniqueness,
        samples_used: used,
        verdict,
        diagnostics: diagnostics(tally, vec![modulus], false, radius),
    })
}

/// Growth check on per-level moduli: the first level `ℓ ≥ from` whose
/// modulus exceeds `factor` times the previous one.
fn first_growth<T: Real>(moduli: &[T], from: usize, factor: f64) -> Option<usize> {
    (from.max(1)..moduli.len()).find(|&l| moduli[l] > lit::<T>(factor) * moduli[l - 1] && moduli[l] > lit(1e-12))
}

/// Pairs of nearby perturbations per shrink level; the distance from a
/// solution at one to the nearest solution found at the other.
pub fn probe_aubin<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, cfg: &ProbeConfig) -> Result<ProbeResult<T>> {
    let radius = cfg.radius_at(x);
    let levels = cfg.shrink_levels.max(1);
    if radius <= T::zero() || cfg.n_samples == 0 {
        return Ok(degenerate(ProbeKind::Aubin, radius));
    }
    let pairs = (cfg.n_samples / (2 * levels)).max(1);
    let (n, m) = (problem.n, problem.m);
    let refp = reference(x, u);
    let runs = par_samples(levels * pairs, cfg.seed, 2, |k, rng| {
        let r = level_radius(cfg, radius, k / pairs);
        let tilt = k % 2 == 1;
        let p1 = draw_perturbation(n, m, r, tilt, rng);
        let p2 = draw_perturbation(n, m, r, tilt, rng);
        let st = starts(&refp, cfg.n_starts, r * lit(SPREAD), rng);
        let s1 = solve_from(problem, &p1, &st, &refp, radius * lit(LOC), r * lit(DISTINCT));
        let gap = Perturbation { a: &p1.a - &p2.a, b: &p1.b - &p2.b }.norm();
        let follow: Vec<Solved<T>> = s1
            .solutions
            .iter()
            .map(|sol| {
                let warm = starts(sol, cfg.n_starts, gap * lit(SPREAD), rng);
                solve_from(problem, &p2, &warm, &refp, radius * lit(LOC), r * lit(DISTINCT))
            })
            .collect();
        (p1, p2, gap, s1, follow)
    });
    let mut tally = Tally::new();
    let mut level_moduli = vec![T::zero(); levels];
    let mut level_best: Vec<Option<Witness>> = vec![None; levels];
    let mut used = 0;
    for (k, (p1, p2, gap, s1, follow)) in runs.iter().enumerate() {
        let level = k / pairs;
        if !tally.record(s1, p1, None) || *gap <= T::zero() {
            continue;
        }
        for (sol, s2) in s1.solutions.iter().zip(follow) {
            if !tally.record(s2, p2, Some(p1)) {
                continue;
            }
            used += 1;
            let dist = s2.solutions.iter().map(|t| t.distance(sol)).fold(T::max_value().unwrap_or(lit(1e300)), |a, b| a.min(b));
            let ratio = dist / *gap;
            if ratio > level_moduli[level] {
                level_moduli[level] = ratio;
                level_best[level] = Some(Witness {
                    reason: "ratio growth across shrink levels".into(),
                    perturbation: flat(p1),
                    other_perturbation: Some(flat(p2)),
                    solutions: vec![flat_pair(sol)],
                });
            }
        }
    }
    if let Some(l) = first_growth(&level_moduli, 1, DIVERGENCE_FACTOR) {
        if let Some(w) = level_best[l].take() {
            tally.witness(w);
        }
    }
    tally.check_failures(levels * pairs)?;
    let modulus = level_moduli.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let low_coverage = pairs < 2;
    let verdict = if tally.witness.is_some() {
        ProbeVerdict::Violated
    } else if low_coverage || used == 0 {
        ProbeVerdict::Inconclusive
    } else {
        ProbeVerdict::Consistent
    };
    Ok(ProbeResult {
        kind: ProbeKind::Aubin,
        modulus_estimate: modulus,
        uniqueness_violations: 0,
        samples_used: used,
        verdict,
        diagnostics: diagnostics(tally, level_moduli, low_coverage, radius),
    })
}

/// A unit direction in `(a, b)`: full, tilt-only or shift-only by index.
fn direction<T: Real>(n: usize, m: usize, k: usize, rng: &mut ChaCha8Rng) -> Perturbation<T> {
    match k % 3 {
        1 => Perturbation { a: random_unit_vector::<T, _>(n, rng), b: DVector::zeros(m) },
        2 if m > 0 => Perturbation { a: DVector::zeros(n), b: random_unit_vector::<T, _>(m, rng) },
        _ => {
            let w = random_unit_vector::<T, _>(n + m, rng);
            Perturbation { a: w.rows(0, n).into_owned(), b: w.rows(n, m).into_owned() }
        }
    }
}

/// Geometric shrinking along fixed directions; starts keep the base spread
/// so that non-isolated solution sets show up as growing ratios.
pub fn probe_isolated_calmness<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>, cfg: &ProbeConfig) -> Result<ProbeResult<T>> {
    let radius = cfg.radius_at(x);
    let levels = cfg.shrink_levels.max(1);
    if radius <= T::zero() || cfg.n_directions == 0 {
        return Ok(degenerate(ProbeKind::IsolatedCalmness, radius));
    }
    let (n, m) = (problem.n, problem.m);
    let refp = reference(x, u);
    let runs = par_samples(cfg.n_directions, cfg.seed, 3, |k, rng| {
        let dir = direction::<T>(n, m, k, rng);
        (0..levels)
            .map(|l| {
                let r = level_radius(cfg, radius, l);
                let pert = Perturbation { a: &dir.a * r, b: &dir.b * r };
                let st = starts(&refp, cfg.n_starts, radius * lit(SPREAD), rng);
                let solved = solve_from(problem, &pert, &st, &refp, radius * lit(LOC), r * lit(DISTINCT));
                (pert, solved)
            })
            .collect::<Vec<_>>()
    });
    let mut tally = Tally::new();
    let mut level_moduli = vec![T::zero(); levels];
    let mut level_best: Vec<Option<Witness>> = vec![None; levels];
    let mut used = 0;
    for run in &runs {
        for (l, (pert, solved)) in run.iter().enumerate() {
            if solved.outcome(pert.norm()) == Outcome::Failed {
                tally.failed += 1;
            }
            if solved.solutions.is_empty() {
                continue;
            }
            used += 1;
            for s in &solved.solutions {
                let ratio = s.distance(&refp) / pert.norm();
                if ratio > level_moduli[l] {
                    level_moduli[l] = ratio;
                    level_best[l] = Some(Witness {
                        reason: "distance ratio grows as the perturbation shrinks".into(),
                        perturbation: flat(pert),
                        other_perturbation: None,
                        solutions: vec![flat_pair(s)],
                    });
                }
            }
        }
    }
    if let Some(l) = first_growth(&level_moduli, 2, CALM_GROWTH) {
        if let Some(w) = level_best[l].take() {
            tally.witness(w);
        }
    }
    tally.check_failures(cfg.n_directions * levels)?;
    let modulus = level_moduli.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let verdict = if tally.witness.is_some() {
        ProbeVerdict::Violated
    } else if used == 0 {
        ProbeVerdict::Inconclusive
    } else {
        ProbeVerdict::Consistent
    };
    Ok(ProbeResult {
        kind: ProbeKind::IsolatedCalmness,
        modulus_estimate: modulus,
        uniqueness_violations: 0,
        samples_used: used,
        verdict,
        diagnostics: diagnostics(tally, level_moduli, cfg.n_directions < LOW_COVERAGE_DIRECTIONS, radius),
    })
}

/// Reads a calmness probe against the certificate: bounded ratios confirm
/// isolated calmness only where SRCQ and SOSC are certified.
pub fn cross_reference_calmness<T: Real>(result: &ProbeResult<T>, cert: &Certificate<T>) -> ProbeVerdict {
    match result.verdict {
        ProbeVerdict::Violated => ProbeVerdict::Violated,
        ProbeVerdict::Consistent if cert.srcq.holds() && cert.sosc.holds() => ProbeVerdict::Consistent,
        _ => ProbeVerdict::Inconclusive,
    }
}

const BALL_SAMPLES: usize = 8;

/// Tilted problems `min φ(x) − ⟨v, x⟩` over the γ-ball: KKT points are
/// compared by objective value, and random feasible points of the ball
/// guard against minimizers the solver cannot see.
pub fn probe_tilt<T: Real>(problem: &ProblemSpec<T>, x: &DVector<T>, cfg: &ProbeConfig) -> Result<ProbeResult<T>> {
    let radius = cfg.radius_at(x);
    if radius <= T::zero() || cfg.n_samples == 0 {
        return Ok(degenerate(ProbeKind::Tilt, radius));
    }
    let (n, m) = (problem.n, problem.m);
    let gamma = radius * lit(LOC);
    let u0 = crate::solver::recover_multiplier(problem, x).map(|(u, _)| u).unwrap_or_else(|_| DVector::zeros(m));
    let refp = reference(x, &u0);
    let value_tol = lit::<T>(1e-6) * radius * radius;
    let runs = par_samples(cfg.n_samples, cfg.seed, 4, |_, rng| {
        let pert = draw_perturbation(n, m, radius, true, rng);
        let st = starts(&refp, cfg.n_starts, radius * lit(SPREAD), rng);
        let solved = solve_from(problem, &pert, &st, &refp, T::max_value().unwrap_or(lit(1e300)), radius * lit(DISTINCT));
        let probes: Vec<DVector<T>> = (0..BALL_SAMPLES)
            .map(|_| x + random_unit_vector::<T, _>(n, rng) * (gamma * lit::<T>(rng.random_range(0.0..1.0))))
            .chain(st.iter().map(|s| s.x.clone()))
            .chain(solved.endpoints.iter().map(|s| s.x.clone()).filter(|p| (p - x).norm() <= gamma))
            .collect();
        (pert, solved, probes)
    });
    let tilted = |p: &DVector<T>, v: &DVector<T>| -> Option<T> {
        problem.objective_value(p).ok().flatten().map(|f| f - v.dot(p))
    };
    let mut tally = Tally::new();
    let mut chosen: Vec<(DVector<T>, DVector<T>)> = Vec::new();
    for (pert, solved, probes) in &runs {
        let inside: Vec<(&PrimalDualPair<T>, T)> = solved
            .solutions
            .iter()
            .filter(|s| (&s.x - x).norm() <= gamma)
            .filter_map(|s| tilted(&s.x, &pert.a).map(|f| (s, f)))
            .collect();
        if inside.is_empty() {
            if solved.outcome(pert.norm()) == Outcome::Failed && !solved.any_converged {
                tally.failed += 1;
            } else {
                tally.lost(pert, None);
            }
            continue;
        }
        let best = inside.iter().map(|(_, f)| *f).fold(T::max_value().unwrap_or(lit(1e300)), |a, b| a.min(b));
        let mut minimizers: Vec<&DVector<T>> = Vec::new();
        for (s, f) in &inside {
            if *f <= best + value_tol && minimizers.iter().all(|q| (*q - &s.x).norm() > radius * lit(DISTINCT)) {
                minimizers.push(&s.x);
            }
        }
        if minimizers.len() > 1 {
            tally.uniqueness += 1;
            tally.witness(Witness {
                reason: "several tilted minimizers in the ball".into(),
                perturbation: flat(pert),
                other_perturbation: None,
                solutions: minimizers.iter().map(|p| p.iter().map(|&c| to_f64(c)).collect()).collect(),
            });
        }
        let distinct = |p: &DVector<T>| minimizers.iter().all(|q| (p - *q).norm() > radius * lit(DISTINCT));
        if let Some(lower) = probes.iter().find(|p| distinct(p) && tilted(p, &pert.a).is_some_and(|f| f < best - value_tol)) {
            tally.witness(Witness {
                reason: "a feasible point of the ball beats every KKT point".into(),
                perturbation: flat(pert),
                other_perturbation: None,
                solutions: vec![lower.iter().map(|&c| to_f64(c)).collect(), minimizers[0].iter().map(|&c| to_f64(c)).collect()],
            });
        }
        chosen.push((pert.a.clone(), minimizers[0].clone()));
    }
    tally.check_failures(cfg.n_samples)?;
    let mut modulus = T::zero();
    for i in 0..chosen.len() {
        for j in i + 1..chosen.len() {
            let dv = (&chosen[i].0 - &chosen[j].0).norm();
            if dv > radius * lit(DISTINCT) {
                modulus = modulus.max((&chosen[i].1 - &chosen[j].1).norm() / dv);
            }
        }
    }
    let used = chosen.len();
    let verdict = if tally.witness.is_some() {
        ProbeVerdict::Violated
    } else if used < 2 {
        ProbeVerdict::Inconclusive
    } else {
        ProbeVerdict::Consistent
    };
    Ok(ProbeResult {
        kind: ProbeKind::Tilt,
        modulus_estimate: modulus,
        uniqueness_violations: tally.uniqueness,
        samples_used: used,
        verdict,
        diagnostics: diagnostics(tally, vec![modulus], false, radius),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_without_witness_abort() {
        let mut t = Tally::new();
        t.failed = 5;
        assert!(matches!(t.check_failures(10), Err(Error::SolveFailuresExceeded { failed: 5, total: 10 })));
        t.failed = 2;
        assert!(t.check_failures(10).is_ok());
        t.failed = 5;
        t.lost(&Perturbation::<f64>::zero(1, 1), None);
        assert!(t.check_failures(10).is_ok());
    }

    #[test]
    fn growth_detection() {
        let m = [1.0, 1.5, 1.6, 1.7];
        assert_eq!(first_growth(&m, 2, 2.0), None);
        let m = [1.0, 1.5, 4.0, 16.0];
        assert_eq!(first_growth(&m, 2, 2.0), Some(2));
        assert_eq!(first_growth(&m, 1, 10.0), None);
    }
}
