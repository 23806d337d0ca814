use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stabilis::conditions::{certify, check_nondegeneracy, check_soqc, jz_min_singular_value};
use stabilis::ConditionsConfig;

use crate::fixtures::{family, Family};
use crate::gen::{random_suite, Instance};
use crate::Tally;

const JZ_SAMPLES: usize = 64;

pub fn criterion_soqc() -> Tally {
    let suite = random_suite(200, &mut ChaCha8Rng::seed_from_u64(4));
    let cfg = ConditionsConfig::default();
    let parts: Vec<Tally> = suite
        .par_iter()
        .map(|inst| {
            let mut t = Tally::default();
            let nd = check_nondegeneracy(&inst.problem, &inst.x, &inst.u, &cfg).unwrap();
            let soqc = check_soqc(&inst.problem, &inst.x, &inst.u, &cfg).unwrap();
            t.check(nd.status == soqc.status, || format!("{}: nondegeneracy {:?}, soqc {:?}", inst.label, nd.status, soqc.status));
            t
        })
        .collect();
    let mut total = Tally::default();
    parts.into_iter().for_each(|p| total.merge(p));
    total
}

/// Local minimizers only: the equivalence is stated for them, and SOSC
/// with a positive margin certifies a strict local minimizer.
fn jacobian_check(inst: &Instance, seed: u64) -> Tally {
    let mut t = Tally::default();
    let cfg = ConditionsConfig { seed, ..ConditionsConfig::default() };
    let cert = certify(&inst.problem, &inst.x, &inst.u, &cfg).unwrap();
    if cert.sosc.margin <= 1e-6 || !cert.soqc.holds() {
        return t;
    }
    let sigma = jz_min_singular_value(&inst.problem, &inst.x, &inst.u, JZ_SAMPLES, seed).unwrap();
    if cert.soqc.margin > 1e-6 && cert.ssosc.margin > 1e-6 {
        t.check(sigma > 1e-9, || format!("{}: SOQC and SSOSC hold but sampled sigma_min = {sigma:e}", inst.label));
    } else if cert.ssosc.margin < -1e-6 {
        t.check(sigma < 1e-6, || format!("{}: SSOSC fails but sampled sigma_min = {sigma:e}", inst.label));
    }
    t
}

pub fn criterion_jacobian() -> Tally {
    let mut instances = random_suite(200, &mut ChaCha8Rng::seed_from_u64(5));
    instances.extend(family(Family::Stable));
    instances.extend(family(Family::SsoscFailing));
    let parts: Vec<Tally> = instances.par_iter().enumerate().map(|(k, inst)| jacobian_check(inst, k as u64)).collect();
    let mut total = Tally::default();
    parts.into_iter().for_each(|p| total.merge(p));
    total
}
