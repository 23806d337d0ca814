//! Argument definitions and the five subcommands.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use stabilis::conditions::{certify, check_ssosc, MultiplierSet};
use stabilis::probe::{cross_reference_calmness, probe_aubin, probe_isolated_calmness, probe_strong_regularity, probe_tilt};
use stabilis::second_order::spectral_example::spectral_ssosc_margin;
use stabilis::second_order::{default_tau_schedule, gamma, gamma_bruteforce_oracle, second_subderivative_oracle};
use stabilis::solver::{ensure_kkt, recover_multiplier, solve_kkt_traced};
use stabilis::{CatalogFunction, CatalogKind, ConditionsConfig, Perturbation, PrimalDualPair, Problem64, ProbeConfig, SolverParams};

use crate::error::CliError;
use crate::input::{parse_problem_file, problem_digest};
use crate::report::{ErrorReport, OracleReport, RunReport, Settings, SolveSummary, SpectralDemoCase};

/// Bruteforce-oracle agreement with the closed form.
const BRUTEFORCE_TOL: f64 = 1e-8;
/// Second-subderivative oracle agreement with the closed form.
const D2_TOL: f64 = 1e-4;
/// Relative agreement of the explicit and generic spectral margins.
const SPECTRAL_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "stabilis", version, about = "Certify well-posedness of KKT systems for min h(x) + g(F(x))")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Sample count (jz samples for certify, perturbations for probe, Jacobian samples for oracle).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Probe perturbation radius; defaults to 1e-4·(1 + ‖x̄‖).
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Margins closer to zero than this read as inconclusive.
    #[arg(long, global = true, default_value_t = 1e-7)]
    pub band: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the KKT system by semismooth Newton.
    Solve(PairArgs),
    /// Check every regularity and second-order condition at a KKT pair.
    Certify(PairArgs),
    /// Run one empirical stability probe.
    Probe {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum)]
        kind: ProbeKindArg,
    },
    /// Compare the explicit spectral-norm form with the generic SSOSC check.
    DemoSpectral,
    /// Evaluate Γ and both oracles at one point of the outer function.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Problem file (JSON).
    pub problem: PathBuf,
    /// Comma-separated primal point.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<VecArg>,
    /// Comma-separated multiplier.
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<VecArg>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Problem file; only its `g` entry is used.
    pub problem: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub x: VecArg,
    #[arg(long, allow_hyphen_values = true)]
    pub u: VecArg,
    #[arg(long, allow_hyphen_values = true)]
    pub v: VecArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeKindArg {
    Aubin,
    Calm,
    Strong,
    Tilt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecArg(pub Vec<f64>);

impl FromStr for VecArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        if s.trim().is_empty() {
            return Ok(VecArg(Vec::new()));
        }
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", t.trim())))
            .collect::<Result<Vec<_>, _>>()
            .map(VecArg)
    }
}

impl VecArg {
    fn checked(&self, flag: &str, len: usize) -> Result<DVector<f64>, CliError> {
        if self.0.len() != len {
            return Err(CliError::Usage(format!("--{flag} has {} entries, expected {len}", self.0.len())));
        }
        Ok(DVector::from_vec(self.0.clone()))
    }
}

impl Cli {
    fn settings(&self) -> Settings {
        let kind = match &self.command {
            Command::Probe { kind, .. } => Some(format!("{kind:?}").to_lowercase()),
            _ => None,
        };
        Settings {
            seed: self.seed,
            margin_band: self.band,
            tau_schedule: default_tau_schedule(),
            samples: self.samples,
            radius: self.radius,
            kind,
        }
    }

    fn conditions(&self) -> ConditionsConfig {
        let base = ConditionsConfig::default();
        ConditionsConfig { margin_band: self.band, jz_samples: self.samples.unwrap_or(base.jz_samples), seed: self.seed, ..base }
    }

    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Solve(_) => "solve",
            Command::Certify(_) => "certify",
            Command::Probe { .. } => "probe",
            Command::DemoSpectral => "demo-spectral",
            Command::Oracle(_) => "oracle",
        }
    }
}

/// Runs the command; errors past argument parsing land in the report.
pub fn run(cli: &Cli) -> RunReport {
    let mut report = RunReport::new(cli.command_name(), cli.settings());
    if !(cli.band >= 0.0) {
        fail(&mut report, CliError::Usage("--band must be nonnegative".into()));
        return report;
    }
    let outcome = match &cli.command {
        Command::Solve(args) => run_solve(cli, args, &mut report),
        Command::Certify(args) => run_certify(cli, args, &mut report),
        Command::Probe { pair, kind } => run_probe(cli, pair, *kind, &mut report),
        Command::DemoSpectral => run_demo(cli, &mut report),
        Command::Oracle(args) => run_oracle(cli, args, &mut report),
    };
    if let Err(e) = outcome {
        fail(&mut report, e);
    } else if report.certificate.as_ref().is_some_and(|c| !c.consistent()) {
        report.exit_code = 3;
    }
    report
}

fn fail(report: &mut RunReport, e: CliError) {
    report.exit_code = e.exit_code();
    report.error = Some(ErrorReport { kind: e.kind().to_string(), message: e.to_string() });
}

fn load(args_problem: &std::path::Path, report: &mut RunReport) -> Result<Problem64, CliError> {
    let (file, problem) = parse_problem_file(args_problem)?;
    report.problem_digest = Some(problem_digest(&file));
    Ok(problem)
}

fn newton(problem: &Problem64, start: PrimalDualPair<f64>) -> Result<SolveSummary, CliError> {
    let pert = Perturbation::zero(problem.n, problem.m);
    let (pair, trace) = solve_kkt_traced(problem, &pert, &start, &SolverParams::default())?;
    Ok(SolveSummary {
        x: pair.x.iter().copied().collect(),
        u: pair.u.iter().copied().collect(),
        origin: "solved".into(),
        residual: trace.final_residual,
        iterations: Some(trace.iterations()),
        converged: trace.converged,
        trace: Some(trace),
    })
}

fn start_pair(problem: &Problem64, args: &PairArgs) -> Result<PrimalDualPair<f64>, CliError> {
    let x = args.x.as_ref().map(|v| v.checked("x", problem.n)).transpose()?.unwrap_or_else(|| DVector::zeros(problem.n));
    let u = args.u.as_ref().map(|v| v.checked("u", problem.m)).transpose()?.unwrap_or_else(|| DVector::zeros(problem.m));
    Ok(PrimalDualPair::new(x, u))
}

/// The pair to analyse: taken as given when both `--x` and `--u` are set,
/// completed by multiplier recovery when only `--x` is, solved otherwise.
fn obtain_pair(problem: &Problem64, args: &PairArgs, report: &mut RunReport) -> Result<(DVector<f64>, DVector<f64>), CliError> {
    let start = start_pair(problem, args)?;
    let summary = match (&args.x, &args.u) {
        (Some(_), Some(_)) => {
            let residual = ensure_kkt(problem, &start.x, &start.u)?;
            SolveSummary {
                x: start.x.iter().copied().collect(),
                u: start.u.iter().copied().collect(),
                origin: "given".into(),
                residual,
                iterations: None,
                converged: true,
                trace: None,
            }
        }
        (Some(_), None) => {
            let (u, _) = recover_multiplier(problem, &start.x)?;
            let residual = ensure_kkt(problem, &start.x, &u)?;
            SolveSummary {
                x: start.x.iter().copied().collect(),
                u: u.iter().copied().collect(),
                origin: "recovered".into(),
                residual,
                iterations: None,
                converged: true,
                trace: None,
            }
        }
        _ => newton(problem, start)?,
    };
    let converged = summary.converged;
    let residual = summary.residual;
    let pair = (DVector::from_vec(summary.x.clone()), DVector::from_vec(summary.u.clone()));
    report.solve = Some(summary);
    if !converged {
        return Err(stabilis::Error::MaxIterExceeded { residual }.into());
    }
    Ok(pair)
}

fn run_solve(_cli: &Cli, args: &PairArgs, report: &mut RunReport) -> Result<(), CliError> {
    let problem = load(&args.problem, report)?;
    let summary = newton(&problem, start_pair(&problem, args)?)?;
    let (converged, residual) = (summary.converged, summary.residual);
    report.solve = Some(summary);
    if !converged {
        return Err(stabilis::Error::MaxIterExceeded { residual }.into());
    }
    Ok(())
}

fn run_certify(cli: &Cli, args: &PairArgs, report: &mut RunReport) -> Result<(), CliError> {
    let problem = load(&args.problem, report)?;
    let (x, u) = obtain_pair(&problem, args, report)?;
    report.certificate = Some(certify(&problem, &x, &u, &cli.conditions())?);
    Ok(())
}

fn run_probe(cli: &Cli, args: &PairArgs, kind: ProbeKindArg, report: &mut RunReport) -> Result<(), CliError> {
    let problem = load(&args.problem, report)?;
    let (x, u) = obtain_pair(&problem, args, report)?;
    let cert = certify(&problem, &x, &u, &cli.conditions())?;
    let base = ProbeConfig::default();
    let cfg = ProbeConfig { radius: cli.radius, n_samples: cli.samples.unwrap_or(base.n_samples), seed: cli.seed, ..base };
    let result = match kind {
        ProbeKindArg::Aubin => probe_aubin(&problem, &x, &u, &cfg)?,
        ProbeKindArg::Strong => probe_strong_regularity(&problem, &x, &u, &cfg)?,
        ProbeKindArg::Tilt => probe_tilt(&problem, &x, &cfg)?,
        ProbeKindArg::Calm => {
            let mut r = probe_isolated_calmness(&problem, &x, &u, &cfg)?;
            r.verdict = cross_reference_calmness(&r, &cert);
            r
        }
    };
    report.certificate = Some(cert);
    report.probes.push(result);
    Ok(())
}

/// `½⟨Qx, x⟩ + ⟨c, x⟩ + ‖x‖₂` over 2×3 matrices, one per case, with `Q` indefinite in one
/// coordinate; `c` is chosen so that `(prox(A), A − prox(A))` is a KKT pair.
fn demo_instance(s: [f64; 2]) -> Result<(Problem64, DVector<f64>, DVector<f64>), CliError> {
    let g = CatalogFunction::new(CatalogKind::Spectral, &[2, 3], 1.0)?;
    let mut a = DVector::zeros(6);
    a[0] = s[0];
    a[3] = s[1];
    let x = g.prox(&a, 1.0)?;
    let u = &a - &x;
    let mut q = DMatrix::identity(6, 6);
    q[(0, 0)] = -0.5;
    let c = -(&q * &x) - &u;
    let problem = Problem64::quadratic(q, c, DMatrix::identity(6, 6), DVector::zeros(6), g)?;
    Ok((problem, x, u))
}

fn run_demo(cli: &Cli, report: &mut RunReport) -> Result<(), CliError> {
    let cfg = cli.conditions();
    for s in [[0.3, 0.1], [0.625, 0.375], [1.5, 0.5]] {
        let (problem, x, u) = demo_instance(s)?;
        let (form, explicit) = spectral_ssosc_margin(&problem, &x, &u)?;
        let mults = MultiplierSet { unique: true, candidates: vec![u.clone()] };
        let generic = check_ssosc(&problem, &x, &mults, &cfg)?.margin;
        let agree = match explicit {
            Some(e) => (e - generic).abs() <= SPECTRAL_TOL * (1.0 + generic.abs()),
            None => generic >= stabilis::conditions::VACUOUS_MARGIN,
        };
        report.spectral_demo.push(SpectralDemoCase {
            case: format!("{:?}", form.case).to_lowercase(),
            scaled_nuclear_norm: form.scaled_nuclear_norm,
            rank: form.rank,
            thresholds: form.thresholds.as_ref().map(|t| (t.k1, t.k2)),
            explicit_margin: explicit,
            generic_margin: generic,
            agree,
        });
    }
    if report.spectral_demo.iter().any(|c| !c.agree) {
        report.exit_code = 3;
    }
    Ok(())
}

fn run_oracle(cli: &Cli, args: &OracleArgs, report: &mut RunReport) -> Result<(), CliError> {
    let problem = load(&args.problem, report)?;
    let g = &problem.g;
    let m = problem.m;
    let (x, mu, v) = (args.x.checked("x", m)?, args.u.checked("u", m)?, args.v.checked("v", m)?);
    let gv = gamma(g, &x, &mu, &v)?.value;
    let bf = gamma_bruteforce_oracle(g, &x, &mu, &v, cli.samples.unwrap_or(64), cli.seed)?;
    let d2 = second_subderivative_oracle(g, &x, &mu, &v, &default_tau_schedule(), cli.seed)?;
    let in_cone = g.critical_set(&x, &mu)?.contains(&v, 1e-9);
    let close = |a: Option<f64>, b: Option<f64>, tol: f64| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol * (1.0 + a.abs()),
        (None, None) => true,
        _ => false,
    };
    let oracle = OracleReport {
        x: x.iter().copied().collect(),
        mu: mu.iter().copied().collect(),
        v: v.iter().copied().collect(),
        gamma: gv,
        bruteforce: bf,
        second_subderivative: d2,
        in_critical_cone: in_cone,
        bruteforce_agrees: close(gv, bf, BRUTEFORCE_TOL),
        second_subderivative_agrees: !in_cone || close(gv, d2, D2_TOL),
    };
    if !(oracle.bruteforce_agrees && oracle.second_subderivative_agrees) {
        report.exit_code = 3;
    }
    report.oracle = Some(oracle);
    Ok(())
}
