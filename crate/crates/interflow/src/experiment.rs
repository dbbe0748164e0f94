//! Named experiments: run, limit ensembles, field validation and sweeps.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use interflow_core::analysis::{feature_report, mode_weight, FeatureReport, ModeWeight};
use interflow_core::limits::{
    initial_sample, integrate_limit, predicted_orth_std, LimitKind, LimitParams, OrthPrediction,
};
use interflow_core::oracle::{self, sample_validation_points, Target, ValidationReport};
use interflow_core::rng::stream;
use interflow_core::schedules::{AlphaForm, NoiseScale};
use interflow_core::velocity::gm_factors;
use interflow_core::{
    CurieWeiss, FieldContext, GaussianMixture, InterpolantSpec, TargetModel, TimeDilation, TrajectoryBatch,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{self, DilationBlock, ExperimentConfig, Format};
use crate::output::{self, coords_csv, magnetization_csv, write_all_or_nothing};
use crate::runner::{par_map, run_batch};

/// Closed-form expectations attached to a report when the run matches a
/// known large-dimension result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub p: f64,
    /// `(t, predicted orthogonal std)` at recorded times from `t = 1/2` on.
    pub orth_std: Option<Vec<(f64, f64)>>,
    /// `(1 + m) / 2` and `(1 - m) / 2` for spin models.
    pub spin_fractions: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub features: FeatureReport,
    pub mode_weight: ModeWeight,
    pub predictions: Predictions,
}

pub struct RunOutcome {
    pub batch: TrajectoryBatch,
    pub report: RunReport,
    pub files: Vec<PathBuf>,
}

pub fn predictions(cfg: &ExperimentConfig, batch: &TrajectoryBatch) -> Predictions {
    let which = match (&cfg.dilation, cfg.interpolant.alpha_form, cfg.interpolant.noise_scale) {
        (DilationBlock::DilatedVp { .. }, AlphaForm::Linear, NoiseScale::Vp) => Some(OrthPrediction::DilatedVp),
        (DilationBlock::DilatedVe { .. }, AlphaForm::Linear, NoiseScale::Ve) => Some(OrthPrediction::DilatedVe),
        (DilationBlock::DilatedVp { .. }, AlphaForm::Circular, NoiseScale::Vp) => {
            Some(OrthPrediction::DilatedVpCircular)
        }
        _ => None,
    };
    let (p, sigma2, spin_fractions) = match batch.config.model {
        TargetModel::GaussianMixture(g) => (g.p, Some(g.sigma2), None),
        TargetModel::CurieWeiss(c) => (c.p, None, Some(((1.0 + c.m) / 2.0, (1.0 - c.m) / 2.0))),
    };
    let orth_std = match (which, sigma2, cfg.dilation.kappa()) {
        (Some(w), Some(s2), Some(kappa)) => Some(
            batch
                .recorded_times()
                .into_iter()
                .filter(|&t| t >= 0.5)
                .map(|t| (t, predicted_orth_std(w, t, s2, kappa)))
                .collect(),
        ),
        _ => None,
    };
    Predictions {
        p,
        orth_std,
        spin_fractions,
    }
}

pub fn artifact_path(dir: &Path, experiment: &str, kind: &str, ext: &str) -> PathBuf {
    dir.join(format!("{experiment}.{kind}.{ext}"))
}

/// Simulates `cfg` and writes its artifacts into `dir` atomically.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, threads: usize) -> Result<RunOutcome> {
    let sim = cfg.simulation()?;
    let batch = run_batch(&sim, threads)?;
    let report = RunReport {
        experiment: cfg.experiment.clone(),
        config: cfg.clone(),
        features: feature_report(&batch),
        mode_weight: mode_weight(&batch),
        predictions: predictions(cfg, &batch),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    for f in &cfg.output.formats {
        let (kind, ext, bytes) = match f {
            Format::Magnetization => ("magnetization", "csv", magnetization_csv(&batch)?),
            Format::Coords => ("coords", "csv", coords_csv(&batch)?),
            Format::Report => ("report", "json", output::json(&report)?),
        };
        files.push((artifact_path(dir, &cfg.experiment, kind, ext), bytes));
    }
    write_all_or_nothing(&files)?;
    Ok(RunOutcome {
        batch,
        report,
        files: files.into_iter().map(|(p, _)| p).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: String,
    pub p_hat: Option<f64>,
    pub p_std_err: Option<f64>,
    pub sigma_hat2_final: Option<f64>,
    pub tau_s: Option<f64>,
    pub error: Option<String>,
}

/// Runs one experiment per value of a numeric key and writes
/// `<experiment>.sweep.csv`. Failed runs are recorded and skipped.
pub fn sweep(
    text: &str,
    overrides: &[(String, String)],
    axis: &str,
    values: &[String],
    dir: &Path,
    threads: usize,
) -> Result<(PathBuf, Vec<SweepRow>)> {
    let base = config::parse(text, overrides)?;
    let tree = serde_json::to_value(&base)?;
    match config::get_path(&tree, axis) {
        Some(Value::Number(_)) => {}
        Some(_) => bail!("sweep axis {axis} is not numeric"),
        None => bail!("sweep axis {axis} is not a configuration key"),
    }
    let leaf = axis.rsplit('.').next().unwrap_or(axis);
    let mut rows = Vec::new();
    for v in values {
        let mut t = tree.clone();
        config::set_path(&mut t, axis, v)?;
        config::set_path(&mut t, "experiment", &format!("\"{}_{leaf}{v}\"", base.experiment))?;
        let outcome = ExperimentConfig::from_value(t)
            .and_then(|cfg| run_experiment(&cfg, dir, threads));
        rows.push(match outcome {
            Ok(o) => SweepRow {
                axis_value: v.clone(),
                p_hat: Some(o.report.mode_weight.p_hat),
                p_std_err: Some(o.report.mode_weight.std_err),
                sigma_hat2_final: o.report.features.sigma_hat2.last().map(|x| x.1),
                tau_s: o.report.features.speciation.map(|s| s.tau_s),
                error: None,
            },
            Err(e) => SweepRow {
                axis_value: v.clone(),
                p_hat: None,
                p_std_err: None,
                sigma_hat2_final: None,
                tau_s: None,
                error: Some(format!("{e:#}")),
            },
        });
    }
    let mut w = output::csv_writer(Vec::new());
    w.write_record(["axis_value", "p_hat", "p_std_err", "sigma_hat2_final", "tau_s", "error"])?;
    let opt = |x: Option<f64>| x.map(output::num).unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.axis_value.clone(),
            opt(r.p_hat),
            opt(r.p_std_err),
            opt(r.sigma_hat2_final),
            opt(r.tau_s),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    std::fs::create_dir_all(dir)?;
    let path = artifact_path(dir, &base.experiment, "sweep", "csv");
    write_all_or_nothing(&[(path.clone(), w.into_inner()?)])?;
    Ok((path, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub kind: String,
    pub members: usize,
    pub t0: f64,
    pub t1: f64,
    pub delta_t: f64,
    pub params: LimitParams,
    pub terminal_mean: f64,
    pub terminal_std: f64,
    pub plus_fraction: f64,
}

pub struct LimitRequest {
    pub kind: LimitKind,
    pub params: LimitParams,
    pub members: usize,
    pub delta_t: f64,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub seed: u64,
    /// Phase-2 members pick their mode with probability `p` when set.
    pub random_modes: bool,
    /// Common starting value; sampled from the entry law when `None`.
    pub initial: Option<f64>,
}

/// Integrates an ensemble of a reduced equation. Member `j` uses stream `j`.
pub fn limit_ensemble(req: &LimitRequest, threads: usize) -> Result<(Vec<u8>, LimitSummary)> {
    if req.members == 0 {
        bail!("ensemble size must be positive");
    }
    let (a, b, _) = req.kind.interval();
    let t0 = req.t0.unwrap_or(a);
    let t1 = req.t1.unwrap_or(b);
    if t0 < a || t1 > b || t0 >= t1 {
        bail!("[{t0}, {t1}] is outside the interval [{a}, {b}] of {}", req.kind.name());
    }
    let members = par_map(req.members, threads, |j| {
        let mut rng = stream(req.seed, j as u64);
        let mut q = req.params;
        if req.random_modes {
            q.mode_sign = if rng.random::<f64>() < q.p { 1.0 } else { -1.0 };
        }
        let y0 = match req.initial {
            Some(y) => y,
            None => initial_sample(req.kind, &q, &mut rng),
        };
        integrate_limit(req.kind, &q, y0, t0, t1, req.delta_t)
    })?
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut w = output::csv_writer(Vec::new());
    w.write_record(["t", "member", "value"])?;
    for (j, m) in members.iter().enumerate() {
        for (&t, &v) in m.times.iter().zip(&m.values) {
            w.write_record([output::num(t), j.to_string(), output::num(v)])?;
        }
    }
    let ends: Vec<f64> = members.iter().map(|m| m.terminal()).collect();
    let n = ends.len() as f64;
    let mean = ends.iter().sum::<f64>() / n;
    let var = if ends.len() > 1 {
        ends.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let summary = LimitSummary {
        kind: req.kind.name().to_string(),
        members: req.members,
        t0,
        t1,
        delta_t: req.delta_t,
        params: req.params,
        terminal_mean: mean,
        terminal_std: var.sqrt(),
        plus_fraction: ends.iter().filter(|&&e| e > 0.0).count() as f64 / n,
    };
    Ok((w.into_inner()?, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidateModel {
    Gm,
    Cw,
}

pub struct ValidateRequest {
    pub model: ValidateModel,
    pub d: usize,
    pub p: f64,
    pub sigma2: f64,
    pub beta_temp: f64,
    pub noise_scale: NoiseScale,
    pub n_points: usize,
    pub n_samples: usize,
    pub tol_sigmas: f64,
    pub seed: u64,
    /// Flip the sign of the mode term of the closed form (negative control).
    pub corrupt: bool,
}

/// Mixture drift with the sign of its `tanh` term flipped.
type ClosedForm = fn(&FieldContext, &[f64], &mut [f64]) -> interflow_core::Result<()>;

pub fn corrupted_gm_velocity(ctx: &FieldContext, x: &[f64], out: &mut [f64]) -> interflow_core::Result<()> {
    let TargetModel::GaussianMixture(g) = ctx.model else {
        return ctx.velocity(x, out);
    };
    let f = gm_factors(&g, &ctx.coeffs)?;
    let rx: f64 = x.iter().sum();
    let shift = -f.tilt * (g.h + f.field * rx).tanh();
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = f.linear * xi + shift;
    }
    Ok(())
}

fn corrupted_denoiser(ctx: &FieldContext, x: &[f64], out: &mut [f64]) -> interflow_core::Result<()> {
    ctx.denoiser(x, out)?;
    out.iter_mut().for_each(|v| *v = -*v);
    Ok(())
}

/// Mixtures are checked through the drift against importance sampling;
/// spin models through the denoiser (exact below `d = 13`).
pub fn validate(req: &ValidateRequest, threads: usize) -> Result<ValidationReport> {
    let model: TargetModel = match req.model {
        ValidateModel::Gm => GaussianMixture::new(req.p, req.sigma2, req.d)?.into(),
        ValidateModel::Cw => CurieWeiss::new(req.p, req.beta_temp, req.d)?.into(),
    };
    let spec = InterpolantSpec::new(AlphaForm::Linear, req.noise_scale);
    let points = sample_validation_points(
        &model,
        &spec,
        &TimeDilation::Uniform,
        req.n_points,
        &mut stream(req.seed, u64::MAX),
    )?;
    let (target, closed): (Target, ClosedForm) =
        match (req.model, req.corrupt) {
            (ValidateModel::Gm, false) => (Target::Velocity, |c, x, o| c.velocity(x, o)),
            (ValidateModel::Gm, true) => (Target::Velocity, corrupted_gm_velocity),
            (ValidateModel::Cw, false) => (Target::Denoiser, |c, x, o| c.denoiser(x, o)),
            (ValidateModel::Cw, true) => (Target::Denoiser, corrupted_denoiser),
        };
    let outcomes = par_map(points.len(), threads, |i| {
        oracle::validate_point(&model, &points[i], target, req.n_samples, req.seed, i, &closed)
    })?
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(oracle::summarize(outcomes, req.tol_sigmas))
}
