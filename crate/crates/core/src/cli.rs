//! Command-line front end. Every subcommand writes CSV/JSON into `--out`.
//!
//! Exit codes: 0 success, 2 I/O or usage, 3 assumption violation, 4 numerical
//! failure (including a failed envelope verification).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::certify::{annotate, certify, compute_d0, verify_envelope};
use crate::counterexample::{closed_form, demonstrate_nonexponential, initial_point, CounterexampleParams};
use crate::dynamics::{AugPdgdField, DynamicsParams};
use crate::error::{Error, Result};
use crate::integrate::{integrate_adaptive, AdaptiveOptions, Trajectory};
use crate::io::{fmt17, write_json, write_text, CsvTable};
use crate::powercurtail::{make_power_curtailment, run_experiment, ExperimentOptions, FeederConfig};
use crate::problem::{
    kkt_residual, make_counterexample, make_random_qp, make_soc_demo, solve_reference_kkt, ConvexProgram,
    PrimalDualPoint, ProblemSpec, DEFAULT_TOL_ACTIVE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Residual target for reference KKT points.
const REFERENCE_TOL: f64 = 1e-10;
const REFERENCE_MAX_TIME: f64 = 1e5;

#[derive(Debug, Parser)]
#[command(name = "augpdgd", version, about = "Augmented primal-dual gradient dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the flow and write the trajectory with a summary.
    Simulate(SimulateArgs),
    /// Compute the exponential-stability certificate, optionally verifying it.
    Certify(CertifyArgs),
    /// Closed-form counterexample study.
    Counterexample(CounterexampleArgs),
    /// Solar-curtailment experiment.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Built-in (`counterexample`, `soc`, `qp`, `power`) or a problem JSON file.
    #[arg(long)]
    pub problem: String,
    /// Plateau length of the counterexample start.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Seed for `qp`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `n,m_I,m_E` for `qp`.
    #[arg(long, default_value = "6,3,2", value_parser = parse_qp_size)]
    pub qp_size: (usize, usize, usize),
    /// Initial point JSON `{"x": [...], "lambda": [...], "nu": [...]}`.
    #[arg(long)]
    pub start: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct IntegrationArgs {
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// End time; defaults to α + 20 for the counterexample and 50 otherwise.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    /// Uniform output intervals.
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub integration: IntegrationArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub integration: IntegrationArgs,
    /// Certified radius; defaults to the distance of the start from z*.
    #[arg(long)]
    pub d0: Option<f64>,
    /// Integrate from the start and check the envelope and Lyapunov decay.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CounterexampleArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Hypothetical envelope constant M.
    #[arg(long, default_value_t = 2.0)]
    pub envelope_m: f64,
    /// Hypothetical envelope rate ξ.
    #[arg(long, default_value_t = 0.1)]
    pub envelope_xi: f64,
    /// Time past α covered by each trajectory.
    #[arg(long, default_value_t = 20.0)]
    pub tail: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,10,50")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
    /// Total PV availability over total load.
    #[arg(long, default_value_t = 4.0)]
    pub pv_ratio: f64,
    /// Feeder JSON; defaults to the bundled 36-bus feeder.
    #[arg(long)]
    pub feeder: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn parse_qp_size(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [n, mi, me] => Ok((n, mi, me)),
        _ => Err("expected n,m_I,m_E".into()),
    }
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Contract(_) | Error::Io { .. } | Error::Json(_) | Error::Feeder(_) => EXIT_USAGE,
        Error::Assumption(_) | Error::Classification(_) => EXIT_ASSUMPTION,
        Error::Generation(_)
        | Error::Divergence { .. }
        | Error::StepUnderflow { .. }
        | Error::StepLimit { .. }
        | Error::Timeout { .. }
        | Error::CertificateInvalid(_) => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Counterexample(a) => cmd_counterexample(a),
        Command::Power(a) => cmd_power(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Honors `AUGPDGD_THREADS` for the global rayon pool.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("AUGPDGD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::contract(format!("AUGPDGD_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Error::contract("AUGPDGD_THREADS must be positive"));
    }
    // A pool that already exists (repeated calls in one process) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[derive(Debug, Deserialize)]
struct StartFile {
    x: Vec<f64>,
    #[serde(default)]
    lambda: Vec<f64>,
    #[serde(default)]
    nu: Vec<f64>,
}

/// A resolved problem with its default start and, when known, its KKT point.
pub struct LoadedProblem {
    pub program: ConvexProgram,
    pub start: PrimalDualPoint,
    pub known_star: Option<PrimalDualPoint>,
    pub counterexample: Option<CounterexampleParams>,
}

pub fn load_problem(args: &ProblemArgs, rho: f64) -> Result<LoadedProblem> {
    let mut counterexample = None;
    let mut known_star = None;
    let program = match args.problem.as_str() {
        "counterexample" => {
            let p = make_counterexample();
            counterexample = Some(CounterexampleParams::new(args.alpha, rho)?);
            known_star = Some(PrimalDualPoint::zeros(p.dims()));
            p
        }
        "soc" => make_soc_demo(),
        "qp" => {
            let (n, mi, me) = args.qp_size;
            make_random_qp(args.seed, n, mi, me, 1.0, 10.0)?
        }
        "power" => make_power_curtailment(&FeederConfig::synthetic_36(), 4.0)?.program,
        path => {
            let path = Path::new(path);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            ProblemSpec::load(path)?.to_program(name)?
        }
    };
    let start = match (&args.start, &counterexample) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let s: StartFile = serde_json::from_str(&text)?;
            let z = PrimalDualPoint::from_slices(&s.x, &s.lambda, &s.nu);
            if z.dims() != program.dims() {
                return Err(Error::contract(format!(
                    "start point dimensions {:?} do not match the problem {:?}",
                    z.dims(),
                    program.dims()
                )));
            }
            z
        }
        (None, Some(cp)) => initial_point(cp),
        (None, None) => PrimalDualPoint::zeros(program.dims()),
    };
    Ok(LoadedProblem {
        program,
        start,
        known_star,
        counterexample,
    })
}

fn adaptive(i: &IntegrationArgs) -> AdaptiveOptions {
    AdaptiveOptions {
        rel_tol: i.rel_tol,
        abs_tol: i.abs_tol,
        n_output: i.samples,
        ..AdaptiveOptions::default()
    }
}

fn horizon(i: &IntegrationArgs, loaded: &LoadedProblem) -> f64 {
    i.horizon
        .unwrap_or_else(|| loaded.counterexample.map(|c| c.alpha + 20.0).unwrap_or(50.0))
}

fn reference_point(loaded: &LoadedProblem, params: &DynamicsParams) -> Result<PrimalDualPoint> {
    match &loaded.known_star {
        Some(z) => Ok(z.clone()),
        None => solve_reference_kkt(
            &loaded.program,
            params,
            &loaded.start,
            REFERENCE_TOL,
            REFERENCE_MAX_TIME,
        ),
    }
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    problem: &'a str,
    dims: crate::Dims,
    rho: f64,
    eta: f64,
    horizon: f64,
    options: &'a AdaptiveOptions,
    samples: usize,
    final_point: &'a PrimalDualPoint,
    final_kkt: crate::problem::KktReport,
    reference: Option<&'a PrimalDualPoint>,
    reference_error: Option<String>,
    max_expansion_ratio: Option<f64>,
    min_lambda: f64,
    closed_form_max_error: Option<f64>,
}

fn closed_form_error(cp: &CounterexampleParams, traj: &Trajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (t, z) in traj.iter() {
        worst = worst.max(z.distance(&closed_form(cp, t)?));
    }
    Ok(worst)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let i = &a.integration;
    let params = DynamicsParams::with_eta(i.rho, i.eta)?;
    let loaded = load_problem(&a.problem, i.rho)?;
    let prog = &loaded.program;
    let t_end = horizon(i, &loaded);
    let opts = adaptive(i);
    let field = AugPdgdField::new(prog, params)?;
    let mut traj = integrate_adaptive(&field, &loaded.start, t_end, &opts)?;

    let (reference, reference_error) = match reference_point(&loaded, &params) {
        Ok(z) => (Some(z), None),
        Err(e) => (None, Some(e.to_string())),
    };
    if let Some(z) = &reference {
        traj.attach_reference(z);
    }
    let closed_form_max_error = match (&loaded.counterexample, i.eta == 1.0) {
        (Some(cp), true) => Some(closed_form_error(cp, &traj)?),
        _ => None,
    };
    let summary = SimulateSummary {
        problem: &prog.name,
        dims: prog.dims(),
        rho: i.rho,
        eta: i.eta,
        horizon: t_end,
        options: &opts,
        samples: traj.len(),
        final_point: traj.last(),
        final_kkt: kkt_residual(prog, traj.last(), DEFAULT_TOL_ACTIVE)?,
        reference: reference.as_ref(),
        reference_error,
        max_expansion_ratio: reference.as_ref().map(|z| traj.max_expansion_ratio(z)),
        min_lambda: traj.min_lambda(),
        closed_form_max_error,
    };
    write_text(&a.out.join("trajectory.csv"), &traj.to_csv())?;
    write_json(&a.out.join("summary.json"), &summary)?;
    println!(
        "simulate: {} samples to t = {}, final KKT residual {:e}",
        traj.len(),
        t_end,
        summary.final_kkt.max_residual()
    );
    if let Some(e) = closed_form_max_error {
        println!("simulate: max deviation from closed form {e:e}");
    }
    Ok(EXIT_OK)
}

pub fn cmd_certify(a: &CertifyArgs) -> Result<i32> {
    let i = &a.integration;
    if i.eta != 1.0 {
        return Err(Error::contract(
            "certificates are computed for eta = 1; fold eta into the problem first",
        ));
    }
    let params = DynamicsParams::new(i.rho)?;
    let loaded = load_problem(&a.problem, i.rho)?;
    let prog = &loaded.program;
    let z_star = reference_point(&loaded, &params)?;
    let start_distance = compute_d0(&loaded.start, &z_star)?;
    let d0 = a.d0.unwrap_or(start_distance);
    let cert = certify(prog, &z_star, d0, i.rho)?;
    write_json(&a.out.join("certificate.json"), &cert)?;
    println!(
        "certify: d0 = {}, beta = {:e}, M_beta = {}, c = {:e}",
        fmt17(d0),
        cert.beta,
        fmt17(cert.m_beta),
        cert.c
    );
    if !a.verify {
        return Ok(EXIT_OK);
    }
    if start_distance > d0 {
        return Err(Error::contract(format!(
            "start lies at distance {start_distance} > d0 = {d0}; cannot verify"
        )));
    }
    let t_end = horizon(i, &loaded);
    let field = AugPdgdField::new(prog, params)?;
    let mut traj = integrate_adaptive(&field, &loaded.start, t_end, &adaptive(i))?;
    annotate(&mut traj, &cert, &z_star);
    let report = verify_envelope(&traj, &cert, &z_star)?;
    write_text(&a.out.join("trajectory.csv"), &traj.to_csv())?;
    write_json(&a.out.join("envelope.json"), &report)?;
    println!(
        "certify: envelope max ratio {:e}, decay excess {:e}: {}",
        report.max_ratio,
        report.max_decay_excess,
        if report.passed { "PASS" } else { "FAIL" }
    );
    Ok(if report.passed { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn cmd_counterexample(a: &CounterexampleArgs) -> Result<i32> {
    if a.alphas.is_empty() {
        return Err(Error::contract("--alphas is empty"));
    }
    let report = demonstrate_nonexponential(&a.alphas, a.rho, a.envelope_m, a.envelope_xi)?;
    let mut table = CsvTable::new(&["alpha", "integral", "envelope_bound", "ratio"]);
    for r in &report.rows {
        table.push_row(&[], [r.alpha, r.integral, r.envelope_bound, r.ratio]);
    }
    write_text(&a.out.join("integrals.csv"), table.as_str())?;
    write_json(&a.out.join("nonexponential.json"), &report)?;

    let prog = make_counterexample();
    let params = DynamicsParams::new(a.rho)?;
    let field = AugPdgdField::new(&prog, params)?;
    for &alpha in &a.alphas {
        let cp = CounterexampleParams::new(alpha, a.rho)?;
        let t_end = alpha + a.tail;
        let opts = AdaptiveOptions {
            rel_tol: a.rel_tol,
            abs_tol: a.abs_tol,
            n_output: (40.0 * t_end).ceil() as usize,
            ..AdaptiveOptions::default()
        };
        let traj = integrate_adaptive(&field, &initial_point(&cp), t_end, &opts)?;
        let mut t = CsvTable::new(&["t", "x", "lambda", "nu", "x_exact", "lambda_exact", "nu_exact", "error"]);
        let mut worst: f64 = 0.0;
        for (time, z) in traj.iter() {
            let e = closed_form(&cp, time)?;
            let err = z.distance(&e);
            worst = worst.max(err);
            t.push_row(
                &[],
                [time, z.x[0], z.lambda[0], z.nu[0], e.x[0], e.lambda[0], e.nu[0], err],
            );
        }
        write_text(&a.out.join(format!("trajectory_alpha_{alpha}.csv")), t.as_str())?;
        println!("counterexample: alpha = {alpha}, max deviation from closed form {worst:e}");
    }
    for r in &report.rows {
        println!(
            "counterexample: alpha = {}, integral = {}, ratio to envelope = {:e}",
            r.alpha,
            fmt17(r.integral),
            r.ratio
        );
    }
    match report.crossover_alpha {
        Some(c) => println!(
            "counterexample: envelope (M, xi) = ({}, {}) fails beyond alpha = {c:e}",
            a.envelope_m, a.envelope_xi
        ),
        None => println!("counterexample: no crossover found on the scan"),
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct PowerReference<'a> {
    pv_ratio: f64,
    p_pv: Vec<f64>,
    z_star: &'a PrimalDualPoint,
    active_set: Vec<usize>,
}

pub fn cmd_power(a: &PowerArgs) -> Result<i32> {
    if a.ratios.is_empty() {
        return Err(Error::contract("--ratios is empty"));
    }
    let config = match &a.feeder {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            FeederConfig::from_json(&text)?
        }
        None => FeederConfig::synthetic_36(),
    };
    let pp = make_power_curtailment(&config, a.pv_ratio)?;
    let prog = &pp.program;
    let params = DynamicsParams::new(a.rho)?;
    let z_star = solve_reference_kkt(
        prog,
        &params,
        &PrimalDualPoint::zeros(prog.dims()),
        REFERENCE_TOL,
        REFERENCE_MAX_TIME,
    )?;
    let opts = ExperimentOptions {
        ratios: a.ratios.clone(),
        instances_per_ratio: a.instances,
        rho: a.rho,
        seed: a.seed,
        horizon: a.horizon,
        n_output: a.samples,
        rel_tol: a.rel_tol,
        abs_tol: a.abs_tol,
    };
    let report = run_experiment(prog, &z_star, &opts)?;
    write_text(&a.out.join("curves.csv"), &report.curves_csv())?;
    write_json(&a.out.join("summary.json"), &report)?;
    write_json(&a.out.join("feeder.json"), &config)?;
    write_json(
        &a.out.join("reference.json"),
        &PowerReference {
            pv_ratio: a.pv_ratio,
            p_pv: pp.p_pv.iter().copied().collect(),
            z_star: &z_star,
            active_set: crate::problem::detect_active_set(prog, &z_star.x, DEFAULT_TOL_ACTIVE),
        },
    )?;
    for s in &report.summaries {
        println!(
            "power: ratio {:>6}: early rate {}, late rate {}, worst final distance {:e}, failures {}",
            s.ratio,
            s.mean_early_rate.map_or("n/a".into(), |r| format!("{r:.4}")),
            s.mean_late_rate.map_or("n/a".into(), |r| format!("{r:.4}")),
            s.max_final_normalized,
            s.failures
        );
    }
    let failed = report.instances.iter().any(|i| i.error.is_some());
    Ok(if failed { EXIT_NUMERICAL } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qp_size_parser() {
        assert_eq!(parse_qp_size("6,3,2").unwrap(), (6, 3, 2));
        assert!(parse_qp_size("6,3").is_err());
        assert!(parse_qp_size("a,b,c").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Assumption("x".into())), EXIT_ASSUMPTION);
        assert_eq!(exit_code(&Error::contract("x")), EXIT_USAGE);
        assert_eq!(exit_code(&Error::StepUnderflow { t: 0.0, h: 0.0 }), EXIT_NUMERICAL);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["augpdgd", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["augpdgd", "power", "--ratios", ""]), EXIT_USAGE);
        assert_eq!(run(["augpdgd", "simulate"]), EXIT_USAGE);
    }
}
