//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain or solve failure, 2 usage or configuration error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Instance, RunConfig};
use crate::run::{self, Failure, SweepRow};
use crate::selftest;
use crate::weights::ValidationMode;

#[derive(Debug, Parser)]
#[command(name = "vexlab", version, about = "Variable-exponent eigenvalue experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural hypotheses of an instance.
    Validate(RunArgs),
    /// Certify the geometry and compute an eigenfunction for one λ.
    Solve(RunArgs),
    /// Solve for each λ of a list and write a CSV table.
    Sweep(RunArgs),
    /// Estimate the constants of the weighted interpolation inequalities.
    Ckn(RunArgs),
    /// Run the built-in invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; overrides output.path of the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Proceed despite failed validation or λ outside the guaranteed interval.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub mode: Option<ValidationMode>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Run only the checks whose name contains this text.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

const EXIT_DOMAIN: u8 = 1;
const EXIT_USAGE: u8 = 2;

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(EXIT_USAGE)
            }
            Failure::Domain(msg) => {
                eprintln!("failed: {msg}");
                ExitCode::from(EXIT_DOMAIN)
            }
        }
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(f) => f.exit(),
    }
}

pub fn execute(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Validate(args) => validate(&args),
        Command::Solve(args) => solve(&args),
        Command::Sweep(args) => sweep(&args),
        Command::Ckn(args) => ckn(&args),
        Command::Selftest(args) => selftest(&args),
    }
}

fn load(args: &RunArgs) -> Result<Instance, Failure> {
    let mut config = RunConfig::from_path(&args.config).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(seed) = args.seed {
        config.solver.seed = seed;
    }
    Instance::build(&config).map_err(|e| Failure::Usage(e.to_string()))
}

fn output_path(args: &RunArgs, instance: &Instance) -> Option<PathBuf> {
    args.out
        .clone()
        .or_else(|| instance.config.output.path.as_ref().map(PathBuf::from))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn status(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn validate(args: &RunArgs) -> Result<ExitCode, Failure> {
    let instance = load(args)?;
    let report = instance.validate(instance.config.mode)?;
    eprintln!("mode: {:?}", report.mode);
    eprintln!(
        "(A) {}: {} vanishing, {} lower-bound violations, ball inside domain: {}",
        status(report.a.passed),
        report.a.nonvanishing_violations.len(),
        report.a.lower_bound_violations.len(),
        report.a.ball_inside_domain
    );
    eprintln!(
        "(P) {}: p in [{}, {}]{}",
        status(report.p.passed),
        report.p.p_minus,
        report.p.p_plus,
        report.p.diagnostic.as_deref().map(|d| format!("; {d}")).unwrap_or_default()
    );
    eprintln!("(Q) {}", status(report.q.passed));
    for c in report.q.chain.iter().chain(std::iter::once(&report.q.embedding_condition)) {
        eprintln!("    {} {}: {} vs {}", status(c.holds), c.name, c.left, c.right);
    }
    if let Some(p) = &args.out {
        emit(Some(p), &to_json(&report)?)?;
    }
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DOMAIN)
    })
}

fn solve(args: &RunArgs) -> Result<ExitCode, Failure> {
    let instance = load(args)?;
    let doc = run::solve(&instance, args.force)?;
    let r = &doc.result;
    eprintln!(
        "lambda {:e} (lambda0 {:e}): energy {:e}, residual {:e}, e1 norm {:e} (rho {}), {} iterations",
        r.lambda, doc.certificate.lambda0, r.energy, r.residual, r.e1_norm, doc.certificate.rho, r.iterations
    );
    emit(output_path(args, &instance).as_deref(), &to_json(&doc)?)?;
    if r.converged {
        eprintln!("converged");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("not converged: {}", r.diagnostic.as_deref().unwrap_or("unknown reason"));
        Ok(ExitCode::from(EXIT_DOMAIN))
    }
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var("VEXLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Failure::Usage(format!("VEXLAB_THREADS = `{v}` is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn sweep_csv(rows: &[SweepRow]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    w.write_record(["lambda", "converged", "energy", "residual", "e1_norm", "iterations", "wall_ms"])
        .map_err(|e| Failure::Usage(e.to_string()))?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.lambda),
            r.converged.to_string(),
            fmt(r.energy),
            fmt(r.residual),
            fmt(r.e1_norm),
            r.iterations.to_string(),
            r.wall_ms.to_string(),
        ])
        .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Usage(e.to_string()))
}

fn sweep(args: &RunArgs) -> Result<ExitCode, Failure> {
    let instance = load(args)?;
    let threads = threads_from_env()?;
    let rows = run::sweep(&instance, args.force, threads)?;
    emit(args.out.as_deref(), &sweep_csv(&rows)?)?;
    let failed = rows.iter().filter(|r| !r.converged).count();
    eprintln!("{} of {} rows converged", rows.len() - failed, rows.len());
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DOMAIN)
    })
}

fn ckn(args: &RunArgs) -> Result<ExitCode, Failure> {
    let instance = load(args)?;
    let doc = run::ckn(&instance)?;
    eprintln!(
        "beta_ckn {:e} from {} samples ({} degenerate)",
        doc.estimate.beta,
        doc.estimate.reports.len(),
        doc.estimate.degenerate.len()
    );
    eprintln!(
        "replication: {:.0}% of {} batches within 2 x beta_ckn",
        100.0 * doc.replication.clean_fraction,
        doc.replication.batches.len()
    );
    if let Some(c) = &doc.classical {
        eprintln!("classical check (a = {}, b = {}, p = {}): max ratio {:e}", c.a_exp, c.b_exp, c.p, c.max_ratio);
    }
    emit(output_path(args, &instance).as_deref(), &to_json(&doc)?)?;
    Ok(ExitCode::SUCCESS)
}

fn selftest(args: &SelftestArgs) -> Result<ExitCode, Failure> {
    let outcomes = selftest::run(args.filter.as_deref(), args.inject_fault.as_deref())?;
    let mut ok = true;
    for o in &outcomes {
        println!("{} {}: {}", status(o.passed), o.name, o.detail);
        ok &= o.passed;
    }
    if ok {
        Ok(ExitCode::SUCCESS)
    } else {
        let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
        eprintln!("failing invariant: {}", failed.join(", "));
        Ok(ExitCode::from(EXIT_DOMAIN))
    }
}
