//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use interflow_core::limits::{LimitKind, LimitParams};
use interflow_core::schedules::NoiseScale;
use interflow_core::{CurieWeiss, GaussianMixture};

use crate::config;
use crate::experiment::{self, LimitRequest, ValidateModel, ValidateRequest};
use crate::output::{self, write_all_or_nothing};

#[derive(Debug, Parser)]
#[command(name = "interflow", version, about = "Probability-flow ODE experiments for two-mode targets")]
#[command(after_help = "Any configuration key can be overridden as a dotted flag, e.g. `--run.d 10000`.")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a configured experiment and write its CSV/JSON artifacts.
    Run(RunArgs),
    /// Integrate an ensemble of a reduced large-dimension equation.
    Limit(LimitArgs),
    /// Check closed-form fields against Monte-Carlo or enumeration oracles.
    Validate(ValidateArgs),
    /// Run an experiment once per value of a numeric configuration key.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `run.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// One of the reduced equations, e.g. `ve-dilated-phase1-m`.
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    #[arg(long, default_value_t = 0.25)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 3.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta_temp: f64,
    #[arg(long, default_value_t = 1000)]
    pub members: usize,
    #[arg(long, default_value_t = 0.001)]
    pub delta_t: f64,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Committed mode for phase-2 equations.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub mode_sign: f64,
    /// Draw each phase-2 member's mode with probability `p` instead.
    #[arg(long)]
    pub random_modes: bool,
    /// Start every member here instead of sampling the entry law.
    #[arg(long, allow_hyphen_values = true)]
    pub initial: Option<f64>,
    /// CSV path; the summary goes next to it as `<stem>.summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    #[arg(long, default_value_t = 0.25)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta_temp: f64,
    #[arg(long, value_enum, default_value_t = ScaleArg::Vp)]
    pub noise_scale: ScaleArg,
    #[arg(long, default_value_t = 5.0)]
    pub tol: f64,
    /// Negative control: validate a deliberately wrong field.
    #[arg(long)]
    pub corrupt: bool,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModelArg {
    Gm,
    Cw,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ScaleArg {
    Vp,
    Ve,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Dotted numeric key, e.g. `run.d`.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes 1 and 2.
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn invalid<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Invalid(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

pub type Overrides = Vec<(String, String)>;

/// Splits `--a.b value` / `--a.b=value` pairs off the argument list.
pub fn extract_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Overrides)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy().into_owned();
        let Some(body) = s.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        if !key.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .map(|v| v.to_string_lossy().into_owned())
                .ok_or_else(|| anyhow!("override --{key} needs a value"))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

/// Entry point shared by the binary and tests.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match dispatch(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

pub fn dispatch(args: Vec<OsString>) -> Result<(), Failure> {
    let (args, overrides) = extract_overrides(args).map_err(invalid)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(invalid(anyhow!("{e}"))),
    };
    if !overrides.is_empty() && !matches!(cli.command, Command::Run(_) | Command::Sweep(_)) {
        return Err(invalid(anyhow!("dotted overrides only apply to run and sweep")));
    }
    match cli.command {
        Command::Run(a) => run(a, overrides, cli.threads),
        Command::Limit(a) => limit(a, cli.threads),
        Command::Validate(a) => validate(a, cli.threads),
        Command::Sweep(a) => sweep(a, overrides, cli.threads),
    }
}

fn run(a: RunArgs, mut overrides: Vec<(String, String)>, threads: usize) -> Result<(), Failure> {
    if let Some(seed) = a.seed {
        overrides.push(("run.seed".into(), seed.to_string()));
    }
    let cfg = config::load(&a.config, &overrides).map_err(invalid)?;
    cfg.simulation().map_err(invalid)?;
    let dir = a.out.unwrap_or_else(|| cfg.output.directory.clone());
    let out = experiment::run_experiment(&cfg, &dir, threads).map_err(runtime)?;
    let w = &out.report.mode_weight;
    println!("{}: p_hat = {:.4} +- {:.4} over {} trajectories", cfg.experiment, w.p_hat, w.std_err, w.n);
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn limit(a: LimitArgs, threads: usize) -> Result<(), Failure> {
    let kind = LimitKind::from_name(&a.kind).ok_or_else(|| {
        let names: Vec<&str> = LimitKind::ALL.iter().map(|k| k.name()).collect();
        invalid(anyhow!("unknown kind {}; expected one of {}", a.kind, names.join(", ")))
    })?;
    let params = if kind.is_curie_weiss() {
        LimitParams::cw(&CurieWeiss::new(a.p, a.beta_temp, 1).map_err(invalid)?, a.kappa)
    } else {
        LimitParams::gm(&GaussianMixture::new(a.p, a.sigma2, 1).map_err(invalid)?, a.kappa)
    }
    .with_mode(a.mode_sign);
    let req = LimitRequest {
        kind,
        params,
        members: a.members,
        delta_t: a.delta_t,
        t0: a.t0,
        t1: a.t1,
        seed: a.seed,
        random_modes: a.random_modes,
        initial: a.initial,
    };
    let (lo, hi, _) = kind.interval();
    let (t0, t1) = (a.t0.unwrap_or(lo), a.t1.unwrap_or(hi));
    if a.members == 0 {
        return Err(invalid(anyhow!("members must be positive")));
    }
    if !(t0 >= lo && t1 <= hi && t0 < t1) {
        return Err(invalid(anyhow!("[{t0}, {t1}] is outside [{lo}, {hi}] for {}", kind.name())));
    }
    let (csv, summary) = experiment::limit_ensemble(&req, threads).map_err(runtime)?;
    let summary_path = summary_path(&a.out);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(runtime)?;
    }
    write_all_or_nothing(&[(a.out.clone(), csv), (summary_path.clone(), output::json(&summary).map_err(runtime)?)])
        .map_err(runtime)?;
    println!(
        "{}: {} members, terminal mean {:.6}, std {:.6}, positive fraction {:.4}",
        summary.kind, summary.members, summary.terminal_mean, summary.terminal_std, summary.plus_fraction
    );
    println!("wrote {} and {}", a.out.display(), summary_path.display());
    Ok(())
}

fn summary_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.summary.json"))
}

fn validate(a: ValidateArgs, threads: usize) -> Result<(), Failure> {
    let req = ValidateRequest {
        model: match a.model {
            ModelArg::Gm => ValidateModel::Gm,
            ModelArg::Cw => ValidateModel::Cw,
        },
        d: a.d,
        p: a.p,
        sigma2: a.sigma2,
        beta_temp: a.beta_temp,
        noise_scale: match a.noise_scale {
            ScaleArg::Vp => NoiseScale::Vp,
            ScaleArg::Ve => NoiseScale::Ve,
        },
        n_points: a.points,
        n_samples: a.samples,
        tol_sigmas: a.tol,
        seed: a.seed,
        corrupt: a.corrupt,
    };
    let report = experiment::validate(&req, threads).map_err(runtime)?;
    println!(
        "{} points ({} excluded), {}: max |z| = {:.3}, max |dev| = {:.3e}, over 3 sigma = {:.2}% -> {}",
        report.points.len(),
        report.excluded.len(),
        if report.exact { "exact" } else { "Monte Carlo" },
        report.max_z,
        report.max_abs_dev,
        100.0 * report.frac_over_3,
        if report.passed { "PASS" } else { "FAIL" }
    );
    let json = output::json(&report).map_err(runtime)?;
    match &a.out {
        Some(path) => write_all_or_nothing(&[(path.clone(), json)])
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime)?,
        None => print!("{}", String::from_utf8_lossy(&json)),
    }
    if report.passed {
        Ok(())
    } else {
        Err(invalid(anyhow!("field validation failed")))
    }
}

fn sweep(a: SweepArgs, overrides: Vec<(String, String)>, threads: usize) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.config)
        .with_context(|| format!("reading {}", a.config.display()))
        .map_err(invalid)?;
    let base = config::parse(&text, &overrides).map_err(invalid)?;
    let dir = a.out.unwrap_or_else(|| base.output.directory.clone());
    let (path, rows) = experiment::sweep(&text, &overrides, &a.axis, &a.values, &dir, threads).map_err(invalid)?;
    for r in &rows {
        match &r.error {
            None => println!(
                "{} = {}: p_hat = {:.4}, tau_s = {}",
                a.axis,
                r.axis_value,
                r.p_hat.unwrap_or(f64::NAN),
                r.tau_s.map(|t| format!("{t:.5}")).unwrap_or_else(|| "n/a".into())
            ),
            Some(e) => println!("{} = {}: failed: {e}", a.axis, r.axis_value),
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn overrides_are_split_off() {
        let (rest, ov) =
            extract_overrides(os(&["interflow", "run", "--run.d", "100", "--config", "c.json", "--run.seed=3"])).unwrap();
        assert_eq!(rest, os(&["interflow", "run", "--config", "c.json"]));
        assert_eq!(ov, vec![("run.d".into(), "100".into()), ("run.seed".into(), "3".into())]);
        assert!(extract_overrides(os(&["interflow", "--run.d"])).is_err());
    }

    #[test]
    fn summary_next_to_csv() {
        assert_eq!(summary_path(Path::new("out/a.csv")), PathBuf::from("out/a.summary.json"));
    }
}
