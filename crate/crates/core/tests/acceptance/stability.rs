use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stabilis::conditions::certify;
use stabilis::linalg::random_unit_vector;
use stabilis::probe::{cross_reference_calmness, probe_aubin, probe_isolated_calmness, probe_strong_regularity, probe_tilt, CALM_GROWTH};
use stabilis::solver::solve_kkt_traced;
use stabilis::{ConditionsConfig, Perturbation, PrimalDualPair, ProbeConfig, ProbeVerdict, SolverParams};

use crate::fixtures::{family, Family};
use crate::gen::Instance;
use crate::Tally;

const NEWTON_STARTS: usize = 5;

fn probe_cfg(seed: u64) -> ProbeConfig {
    ProbeConfig { seed, ..ProbeConfig::default() }
}

fn stable_fixture_check(inst: &Instance, seed: u64) -> Tally {
    let mut t = Tally::default();
    let (p, x, u) = (&inst.problem, &inst.x, &inst.u);
    let cert = certify(p, x, u, &ConditionsConfig::default()).unwrap();
    t.check(cert.certified_stable(), || format!("{}: fixture is not certified stable", inst.label));
    let cfg = probe_cfg(seed);
    let calm = probe_isolated_calmness(p, x, u, &cfg).unwrap();
    let verdicts = [
        ("aubin", probe_aubin(p, x, u, &cfg).map(|r| r.verdict)),
        ("strong_regularity", probe_strong_regularity(p, x, u, &cfg).map(|r| r.verdict)),
        ("tilt", probe_tilt(p, x, &cfg).map(|r| r.verdict)),
        ("isolated_calmness", Ok(cross_reference_calmness(&calm, &cert))),
    ];
    for (name, v) in verdicts {
        t.check(matches!(v, Ok(ProbeVerdict::Consistent)), || format!("{}: {name} gave {v:?}", inst.label));
    }
    t
}

fn failing_fixture_check(inst: &Instance, seed: u64, family: Family) -> Tally {
    let mut t = Tally::default();
    let (p, x, u) = (&inst.problem, &inst.x, &inst.u);
    let cert = certify(p, x, u, &ConditionsConfig::default()).unwrap();
    let labelled = match family {
        Family::SsoscFailing => cert.ssosc.fails(),
        _ => cert.nondegeneracy.fails(),
    };
    t.check(labelled, || format!("{}: fixture does not fail the intended condition", inst.label));
    let cfg = probe_cfg(seed);
    let verdicts = [
        probe_strong_regularity(p, x, u, &cfg).map(|r| r.verdict),
        probe_aubin(p, x, u, &cfg).map(|r| r.verdict),
        probe_tilt(p, x, &cfg).map(|r| r.verdict),
    ];
    let violated = verdicts.iter().any(|v| matches!(v, Ok(ProbeVerdict::Violated)));
    t.check(violated, || format!("{}: no probe violated ({verdicts:?})", inst.label));
    t
}

pub fn criterion_probes() -> Tally {
    let mut total = Tally::default();
    let stable: Vec<Tally> = family(Family::Stable).par_iter().enumerate().map(|(k, i)| stable_fixture_check(i, k as u64)).collect();
    stable.into_iter().for_each(|p| total.merge(p));
    for f in [Family::SsoscFailing, Family::NondegeneracyFailing] {
        let parts: Vec<Tally> = family(f).par_iter().enumerate().map(|(k, i)| failing_fixture_check(i, k as u64, f)).collect();
        parts.into_iter().for_each(|p| total.merge(p));
    }
    total
}

fn newton_check(inst: &Instance, k: usize) -> Tally {
    let mut t = Tally::default();
    let (p, x, u) = (&inst.problem, &inst.x, &inst.u);
    let mut rng = ChaCha8Rng::seed_from_u64(60 + k as u64);
    let reference = PrimalDualPair::new(x.clone(), u.clone());
    for _ in 0..NEWTON_STARTS {
        let w = random_unit_vector::<f64, _>(p.n + p.m, &mut rng) * 0.1;
        let start = PrimalDualPair::new(x + w.rows(0, p.n), u + w.rows(p.n, p.m));
        let (pair, trace) = solve_kkt_traced(p, &Perturbation::zero(p.n, p.m), &start, &SolverParams::default()).unwrap();
        let its = trace.iterations();
        t.check(trace.converged && trace.final_residual <= 1e-10 && its <= 25, || {
            format!("{}: residual {:e} after {its} iterations", inst.label, trace.final_residual)
        });
        let last: Vec<f64> = trace.ratios.iter().rev().take(3).copied().collect();
        t.check(last.iter().all(|&r| r < 0.5), || format!("{}: last contraction ratios {last:?}", inst.label));
        let dist = pair.distance(&reference);
        t.check(dist <= 1e-6, || format!("{}: converged {dist:e} away from the reference pair", inst.label));
    }
    t
}

pub fn criterion_newton() -> Tally {
    let parts: Vec<Tally> = family(Family::Stable).par_iter().enumerate().map(|(k, i)| newton_check(i, k)).collect();
    let mut total = Tally::default();
    parts.into_iter().for_each(|p| total.merge(p));
    total
}

fn calmness_check(inst: &Instance, seed: u64) -> Tally {
    let mut t = Tally::default();
    let (p, x, u) = (&inst.problem, &inst.x, &inst.u);
    let cert = certify(p, x, u, &ConditionsConfig::default()).unwrap();
    if !(cert.srcq.holds() && cert.sosc.holds()) {
        return t;
    }
    let r = probe_isolated_calmness(p, x, u, &probe_cfg(seed)).unwrap();
    let lm = &r.diagnostics.level_moduli;
    let bounded = (2..lm.len()).all(|i| lm[i] <= CALM_GROWTH * lm[i - 1] + 1e-12);
    t.check(bounded && r.verdict != ProbeVerdict::Violated, || format!("{}: level moduli {lm:?}, verdict {:?}", inst.label, r.verdict));
    t
}

pub fn criterion_calmness() -> Tally {
    let mut instances = family(Family::Stable);
    instances.extend(family(Family::SsoscFailing));
    let parts: Vec<Tally> = instances.par_iter().enumerate().map(|(k, i)| calmness_check(i, k as u64)).collect();
    let mut total = Tally::default();
    parts.into_iter().for_each(|p| total.merge(p));
    total
}
