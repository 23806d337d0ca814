//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

mod conditions;
mod fixtures;
mod gamma;
mod gen;
mod prox;
mod stability;

use std::time::Instant;

/// Counts checks and keeps the first few failures for the report line.
#[derive(Default)]
pub struct Tally {
    pub checks: usize,
    pub failures: usize,
    pub notes: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.notes.len() < 3 {
                self.notes.push(what());
            }
        }
    }

    pub fn merge(&mut self, other: Tally) {
        self.checks += other.checks;
        self.failures += other.failures;
        for n in other.notes {
            if self.notes.len() < 3 {
                self.notes.push(n);
            }
        }
    }

    fn line(&self) -> String {
        if self.failures == 0 {
            format!("{} checks", self.checks)
        } else {
            format!("{} of {} checks failed; first: {}", self.failures, self.checks, self.notes.join(" | "))
        }
    }
}

type Criterion = (&'static str, fn() -> Tally);

fn main() {
    let criteria: [Criterion; 8] = [
        ("prox: Moreau identity, firm nonexpansiveness, Jacobian spectrum", prox::criterion),
        ("gamma agrees with both oracles", gamma::criterion_oracles),
        ("spectral-norm explicit form vs generic SSOSC", gamma::criterion_spectral),
        ("SOQC status equals nondegeneracy status", conditions::criterion_soqc),
        ("SOQC+SSOSC vs sampled Jacobian singularity", conditions::criterion_jacobian),
        ("probe verdicts on stable and failing fixtures", stability::criterion_probes),
        ("semismooth Newton local convergence", stability::criterion_newton),
        ("isolated calmness bounded under SRCQ+SOSC", stability::criterion_calmness),
    ];
    // `ACCEPTANCE_ONLY=2,5` restricts the run to those criteria.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let (mut failed, mut ran) = (0, 0);
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let tally = run();
        let ok = tally.failures == 0 && tally.checks > 0;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} {} ({}; {:.1}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            tally.line(),
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} of {ran} criteria failed");
    // Failures are reported above; `ACCEPTANCE_STRICT=1` also turns them into a nonzero exit.
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
