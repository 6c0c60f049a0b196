//! `sparse-spectra` command-line driver.
//!
//! Exit codes: 0 success, 1 audit failure, 2 usage error, infeasible request
//! or malformed state.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparse_spectra::construct::run_construction;
use sparse_spectra::io::{
    amplitude_svg, eigenvalue_csv, read_state, to_canonical_json, trace_csv, write_atomic, write_state, RunConfig,
};
use sparse_spectra::spectral::eigenvalues;
use sparse_spectra::verify::{run_audits, AuditSelection};
use sparse_spectra::{truncate, Evaluator};

#[derive(Parser)]
#[command(name = "sparse-spectra", version, about = "Staged sparse potentials and certified survival amplitudes")]
struct Cli {
    /// key=value file applied over the defaults; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the staged construction and write the state file
    Construct(ConstructArgs),
    /// Write a certified trace of the amplitude over a time range
    Evaluate(EvaluateArgs),
    /// Replay audits against a state file
    Audit(AuditArgs),
    /// Write the ascending eigenvalues of a truncation
    Spectrum(SpectrumArgs),
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    l1: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long, allow_hyphen_values = true)]
    t_start: f64,
    #[arg(long, allow_hyphen_values = true)]
    t_end: f64,
    #[arg(long)]
    step: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    state: PathBuf,
    /// all | witnesses | freeze | spectrum | decoupling
    #[arg(long, default_value = "all")]
    which: AuditSelection,
    /// JSON report path
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    spot_check_seed: Option<u64>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long = "box")]
    size: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure { code: 2, message: message.to_string() }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()).map_err(usage),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn construct(mut cfg: RunConfig, args: ConstructArgs) -> Result<(), Failure> {
    if let Some(v) = args.stages {
        cfg.stages = v;
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = args.l1 {
        cfg.l1 = v;
    }
    if let Some(v) = args.out {
        cfg.out = Some(v);
    }
    cfg.validate().map_err(usage)?;
    let out = cfg.out.clone().ok_or_else(|| usage("--out is required"))?;
    let state =
        run_construction(cfg.stages, &cfg.construction()).map_err(|e| usage(format!("construction failed: {e}")))?;
    write_state(&out, &state).map_err(usage)
}

fn evaluate(cfg: RunConfig, args: EvaluateArgs) -> Result<(), Failure> {
    if args.step.is_nan() || args.step <= 0.0 {
        return Err(usage("--step must be positive"));
    }
    if args.t_end < args.t_start {
        return Err(usage("--t-end must not precede --t-start"));
    }
    let state = read_state(&args.state).map_err(usage)?;
    let evaluator = Evaluator::new(cfg.spectral());
    let count = ((args.t_end - args.t_start) / args.step * (1.0 + 1e-12)).floor() as usize + 1;
    let mut rows = Vec::with_capacity(count);
    for k in 0..count {
        let t = args.t_start + k as f64 * args.step;
        let amp = evaluator
            .fourier_certified(&state.potential, args.lambda, t, args.tol)
            .map_err(|e| usage(format!("t = {t}: {e}")))?;
        rows.push((t, amp));
    }
    emit(args.out.as_deref().or(cfg.out.as_deref()), &trace_csv(&rows))?;
    if let Some(svg) = args.svg.or(cfg.svg) {
        let points: Vec<_> = rows.iter().map(|(t, a)| (*t, a.value)).collect();
        write_atomic(&svg, amplitude_svg(&points).as_bytes()).map_err(usage)?;
    }
    Ok(())
}

fn audit(mut cfg: RunConfig, args: AuditArgs) -> Result<(), Failure> {
    if let Some(seed) = args.spot_check_seed {
        cfg.spot_check_seed = Some(seed);
    }
    let state = read_state(&args.state).map_err(usage)?;
    let evaluator = Evaluator::new(cfg.spectral());
    let reports = run_audits(&state, args.which, &cfg.audit_options(), &evaluator);
    for r in &reports {
        print!("{r}");
    }
    if let Some(out) = args.out.or(cfg.out) {
        let json = to_canonical_json(&reports).map_err(usage)?;
        write_atomic(&out, json.as_bytes()).map_err(usage)?;
    }
    if reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        Err(Failure { code: 1, message: format!("audit failed: {}", failed.join(", ")) })
    }
}

fn spectrum(cfg: RunConfig, args: SpectrumArgs) -> Result<(), Failure> {
    if args.size > cfg.max_box {
        return Err(usage(format!("box {} exceeds the matrix ceiling {}", args.size, cfg.max_box)));
    }
    let state = read_state(&args.state).map_err(usage)?;
    let op = truncate(&state.potential, args.lambda, args.size).map_err(usage)?;
    let values = eigenvalues(&op).map_err(usage)?;
    emit(args.out.as_deref().or(cfg.out.as_deref()), &eigenvalue_csv(&values))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        if let Err(e) = cfg.apply_file(path) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Construct(a) => construct(cfg, a),
        Command::Evaluate(a) => evaluate(cfg, a),
        Command::Audit(a) => audit(cfg, a),
        Command::Spectrum(a) => spectrum(cfg, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
