use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use hjrate::harness::{
    emit_report, read_report, run_certify, run_envelope_check, run_stationary_sweep, run_sweep, EnvelopeCheckConfig,
    SweepConfig, SweepReport,
};
use hjrate::operators::{ProblemConfig, ProblemSpec};
use hjrate::Error;

#[derive(Parser)]
#[command(name = "hjrate", version, about = "Vanishing-viscosity rate verification for Hamilton-Jacobi equations")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config file (for `report`: a report.json).
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, e.g. `epsilons.count=6` or `problem.grid.N=512`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for independent solves.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Audit the structural constants of the Hamiltonian and diffusion.
    Certify(Common),
    /// Evolution ε-sweep.
    Sweep(Common),
    /// Stationary ε-sweep.
    StationarySweep(Common),
    /// Regularization bound suite on a sampled function.
    EnvelopeCheck(Common),
    /// Re-render a stored report.
    Report(Common),
}

enum Failure {
    Violated,
    Usage(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e)
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), Error> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("cannot descend into `{part}` of `{key}`")))?;
        if k + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        node = obj.entry((*part).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::Config(format!("empty override key `{key}`")))
}

fn load(common: &Common) -> Result<Value, Error> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| Error::Config(format!("{}: {e}", common.config.display())))?;
    let mut value: Value = serde_json::from_str(&text)?;
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not KEY=VALUE")))?;
        let parsed = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        set_path(&mut value, k.trim(), parsed)?;
    }
    if let Some(w) = common.workers {
        set_path(&mut value, "workers", Value::from(w))?;
    }
    if let Some(out) = &common.out {
        set_path(&mut value, "output_dir", Value::from(out.to_string_lossy().into_owned()))?;
    }
    Ok(value)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn summarize(report: &SweepReport) {
    for r in &report.rows {
        println!(
            "eps={:.3e} t={} N={} err={:.4e} bound={:.4e} proxy={:.2e}{}{}",
            r.epsilon,
            r.time.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
            r.points,
            r.sup_error,
            r.bound_rhs,
            r.discretization_proxy,
            if r.contaminated { " contaminated" } else { "" },
            if r.bound_satisfied { "" } else { " VIOLATED" },
        );
    }
    match &report.fitted_rate {
        Some(f) => println!(
            "fitted rate {:.4} [{:.4}, {:.4}] over {} rows; theoretical exponent {:.4}",
            f.slope, f.interval[0], f.interval[1], f.points, report.theoretical_exponent
        ),
        None => println!(
            "fitted rate unavailable ({}); theoretical exponent {:.4}",
            report.fit_unavailable.as_deref().unwrap_or("no rows"),
            report.theoretical_exponent
        ),
    }
    println!("{}", if report.passed() { "PASS" } else { "FAIL" });
}

fn sweep(common: &Common, stationary: bool) -> Result<(), Failure> {
    let value = load(common)?;
    let (config, problem) = SweepConfig::from_json_value(value, common.config.parent())?;
    let report = if stationary { run_stationary_sweep(&config, &problem)? } else { run_sweep(&config, &problem)? };
    emit_report(&report, &config.output_dir)?;
    summarize(&report);
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Violated)
    }
}

fn certify(common: &Common) -> Result<(), Failure> {
    let value = load(common)?;
    let samples = value.get("samples").and_then(Value::as_u64).unwrap_or(10_000) as usize;
    let mut seed = value.get("seed").and_then(Value::as_u64).unwrap_or(0);
    if let Ok(s) = std::env::var("HJRATE_SEED") {
        seed = s.trim().parse().map_err(|_| Error::Config(format!("HJRATE_SEED must be an unsigned integer, got {s:?}")))?;
    }
    let problem_value = if value.get("hamiltonian").is_some() {
        value
    } else {
        let (cfg, _) = SweepConfig::from_json_value(value, common.config.parent())?;
        serde_json::to_value(cfg.problem.expect("resolved problem")).map_err(Error::from)?
    };
    let cfg: ProblemConfig = serde_json::from_value(problem_value).map_err(Error::from)?;
    let problem = ProblemSpec::try_from(cfg)?;
    let report = run_certify(&problem, samples, seed)?;
    print_json(&report)?;
    if let Some(out) = &common.out {
        std::fs::create_dir_all(out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
        let path = out.join("certificate.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&report).map_err(Error::from)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Violated)
    }
}

fn envelope_check(common: &Common) -> Result<(), Failure> {
    let mut value = load(common)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("workers");
        obj.remove("output_dir");
    }
    let cfg: EnvelopeCheckConfig = serde_json::from_value(value).map_err(Error::from)?;
    let report = run_envelope_check(&cfg, common.out.as_deref())?;
    print_json(&report)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Violated)
    }
}

fn report(common: &Common) -> Result<(), Failure> {
    let report = read_report(&common.config)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| common.config.parent().map(Path::to_path_buf).unwrap_or_default());
    emit_report(&report, &out)?;
    summarize(&report);
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Violated)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.verb {
        Verb::Certify(c) => certify(c),
        Verb::Sweep(c) => sweep(c, false),
        Verb::StationarySweep(c) => sweep(c, true),
        Verb::EnvelopeCheck(c) => envelope_check(c),
        Verb::Report(c) => report(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violated) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
