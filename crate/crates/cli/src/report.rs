//! The JSON run report and its one-screen text summary.

use serde::Serialize;
use stabilis::conditions::ConsistencyOutcome;
use stabilis::{Certificate64, ProbeResult64, Trace64};

pub const SCHEMA: &str = "stabilis-report/1";

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub margin_band: f64,
    pub tau_schedule: Vec<f64>,
    pub samples: Option<usize>,
    pub radius: Option<f64>,
    pub kind: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// `given`, `recovered` (multiplier from `x`) or `solved`.
    pub origin: String,
    pub residual: f64,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub trace: Option<Trace64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub v: Vec<f64>,
    /// `null` stands for `+∞`.
    pub gamma: Option<f64>,
    pub bruteforce: Option<f64>,
    pub second_subderivative: Option<f64>,
    /// Γ and the second subderivative are only compared on the critical cone.
    pub in_critical_cone: bool,
    pub bruteforce_agrees: bool,
    pub second_subderivative_agrees: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralDemoCase {
    pub case: String,
    pub scaled_nuclear_norm: f64,
    pub rank: usize,
    pub thresholds: Option<(usize, usize)>,
    pub explicit_margin: Option<f64>,
    pub generic_margin: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub stabilis: &'static str,
    pub cli: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: String,
    pub problem_digest: Option<String>,
    pub settings: Settings,
    pub solve: Option<SolveSummary>,
    pub certificate: Option<Certificate64>,
    pub probes: Vec<ProbeResult64>,
    pub oracle: Option<OracleReport>,
    pub spectral_demo: Vec<SpectralDemoCase>,
    pub error: Option<ErrorReport>,
    pub exit_code: i32,
    pub versions: Versions,
}

impl RunReport {
    pub fn new(command: &str, settings: Settings) -> Self {
        RunReport {
            schema: SCHEMA,
            command: command.to_string(),
            problem_digest: None,
            settings,
            solve: None,
            certificate: None,
            probes: Vec::new(),
            oracle: None,
            spectral_demo: Vec::new(),
            error: None,
            exit_code: 0,
            versions: Versions { stabilis: stabilis::VERSION, cli: env!("CARGO_PKG_VERSION") },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn summary(&self) -> String {
        let mut out = format!("stabilis {}", self.command);
        if let Some(d) = &self.problem_digest {
            out += &format!(" [{}]", &d[..12.min(d.len())]);
        }
        out.push('\n');
        if let Some(s) = &self.solve {
            out += &format!("  pair ({}): residual {:.2e}", s.origin, s.residual);
            if let Some(it) = s.iterations {
                out += &format!(", {it} iterations");
            }
            out.push('\n');
        }
        if let Some(c) = &self.certificate {
            let rows = [
                ("rcq", &c.rcq),
                ("srcq", &c.srcq),
                ("nondegeneracy", &c.nondegeneracy),
                ("soqc", &c.soqc),
                ("sosc", &c.sosc),
                ("ssosc", &c.ssosc),
                ("jz_nonsingular", &c.jz_nonsingular),
            ];
            for (name, v) in rows {
                out += &format!("  {name:<15} {:<12} margin {:+.3e}\n", format!("{:?}", v.status).to_lowercase(), v.margin);
            }
            for (k, v) in &c.consistency {
                if *v == ConsistencyOutcome::Fail {
                    out += &format!("  consistency violated: {k}\n");
                }
            }
        }
        for p in &self.probes {
            out += &format!("  probe {:?}: {:?}, modulus {:.3e}\n", p.kind, p.verdict, p.modulus_estimate);
        }
        if let Some(o) = &self.oracle {
            out += &format!("  gamma {:?}, bruteforce {:?}, d2 {:?}\n", o.gamma, o.bruteforce, o.second_subderivative);
        }
        for c in &self.spectral_demo {
            out += &format!("  {:<8} explicit {:?} generic {:.6e} agree {}\n", c.case, c.explicit_margin, c.generic_margin, c.agree);
        }
        if let Some(e) = &self.error {
            out += &format!("  error ({}): {}\n", e.kind, e.message);
        }
        out += &format!("  exit {}", self.exit_code);
        out
    }
}
