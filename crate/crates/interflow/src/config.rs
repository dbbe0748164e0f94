//! Experiment configuration files.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use interflow_core::schedules::{AlphaForm, NoiseScale};
use interflow_core::{CurieWeiss, GaussianMixture, InterpolantSpec, SimulationConfig, TargetModel, TimeDilation};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub model: ModelBlock,
    pub interpolant: InterpolantBlock,
    pub dilation: DilationBlock,
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelBlock {
    Gm { p: f64, sigma2: f64 },
    Cw { p: f64, beta_temp: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolantBlock {
    pub alpha_form: AlphaForm,
    pub noise_scale: NoiseScale,
}

/// The dimension of dilated kinds is taken from `run.d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DilationBlock {
    Uniform,
    DilatedVp { kappa: f64 },
    DilatedVe { kappa: f64 },
    DdpmGamma { gamma_min: f64, gamma_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub d: usize,
    pub delta_t: f64,
    pub n_traj: usize,
    pub seed: u64,
    #[serde(default)]
    pub record_coords: usize,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub keep_final_state: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Magnetization,
    Coords,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn all_formats() -> Vec<Format> {
    vec![Format::Magnetization, Format::Coords, Format::Report]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: all_formats(),
        }
    }
}

impl ModelBlock {
    pub fn build(&self, d: usize) -> Result<TargetModel> {
        Ok(match *self {
            ModelBlock::Gm { p, sigma2 } => GaussianMixture::new(p, sigma2, d)?.into(),
            ModelBlock::Cw { p, beta_temp } => CurieWeiss::new(p, beta_temp, d)?.into(),
        })
    }
}

impl DilationBlock {
    pub fn build(&self, d: usize) -> TimeDilation {
        match *self {
            DilationBlock::Uniform => TimeDilation::Uniform,
            DilationBlock::DilatedVp { kappa } => TimeDilation::DilatedVp { kappa, dim: d },
            DilationBlock::DilatedVe { kappa } => TimeDilation::DilatedVe { kappa, dim: d },
            DilationBlock::DdpmGamma { gamma_min, gamma_max } => TimeDilation::DdpmGamma { gamma_min, gamma_max },
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match *self {
            DilationBlock::DilatedVp { kappa } | DilationBlock::DilatedVe { kappa } => Some(kappa),
            _ => None,
        }
    }
}

impl ExperimentConfig {
    /// Builds and validates the simulation parameters.
    pub fn simulation(&self) -> Result<SimulationConfig> {
        let r = &self.run;
        if r.d == 0 {
            bail!("run.d must be positive");
        }
        if r.n_traj == 0 {
            bail!("run.n_traj must be positive");
        }
        let cfg = SimulationConfig {
            model: self.model.build(r.d)?,
            interpolant: InterpolantSpec::new(self.interpolant.alpha_form, self.interpolant.noise_scale),
            dilation: self.dilation.build(r.d),
            steps: SimulationConfig::steps_for(r.delta_t)?,
            n_traj: r.n_traj,
            seed: r.seed,
            record_coords: r.record_coords,
            record_stride: r.record_stride,
            keep_final_state: r.keep_final_state,
        };
        cfg.validate()?;
        if self.experiment.is_empty() || self.experiment.contains(['/', '\\']) {
            bail!("experiment name must be a non-empty file stem");
        }
        Ok(cfg)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| anyhow!("invalid configuration: {e}"))
    }
}

/// Reads a configuration, applying dotted overrides before typing it.
pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text, overrides).with_context(|| format!("in {}", path.display()))
}

pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| anyhow!("line {}, column {}: {e}", e.line(), e.column()))?;
    for (key, raw) in overrides {
        set_path(&mut value, key, raw)?;
    }
    if overrides.is_empty() {
        // typed parse of the raw text keeps line numbers in error messages
        return serde_json::from_str(text).map_err(|e| anyhow!("line {}, column {}: {e}", e.line(), e.column()));
    }
    ExperimentConfig::from_value(value)
}

/// Sets `a.b.c` in a JSON tree. The value is read as JSON when it parses,
/// as a string otherwise.
pub fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("override {key}: {} is not a table", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    bail!("empty override key")
}

/// Reads a numeric key such as `run.d` from a configuration.
pub fn get_path<'a>(root: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(root, |node, part| node.get(part))
}
