//! Run configuration: a TOML file, patched by CLI flags and `--override
//! key=value` pairs, then resolved against an environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use svdro_core::control::{EpisodeConfig, SamplerConfig};
use svdro_core::svgd::KernelKind;
use svdro_core::{ControllerKind, EnvSpec, PhysParams, Settings};
use toml::{Table, Value};

use crate::error::{invalid, BenchError, BenchResult};

pub const OUT_DIR_VAR: &str = "SVDRO_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "svdro-out";
pub const CONTROLLERS: [&str; 4] = ["nominal", "emppi", "softdro", "svdro"];
pub const KERNELS: [&str; 3] = ["rbf", "constant", "imq"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// `tray` or `pusht`; ignored when `env_file` is set.
    pub env: String,
    /// Full environment description in TOML.
    pub env_file: Option<PathBuf>,
    pub controllers: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
    /// m
    pub thresholds: Vec<f64>,
    pub out: Option<PathBuf>,
    /// Pins θ* (uncertain axes, prior order) instead of drawing it.
    pub true_params: Option<Vec<f64>>,
    /// Overrides the environment's particle count N.
    pub particles: Option<usize>,
    pub svdro: SvdroOptions,
    pub softdro: SoftDroOptions,
    pub episode: EpisodePatch,
    pub sampler: SamplerPatch,
    pub ablation: AblationOptions,
    pub trace: TraceOptions,
    pub scale: ScaleOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "tray".into(),
            env_file: None,
            controllers: CONTROLLERS.iter().map(|s| s.to_string()).collect(),
            trials: 32,
            seed: 0,
            workers: 1,
            thresholds: vec![0.10, 0.01],
            out: None,
            true_params: None,
            particles: None,
            svdro: SvdroOptions::default(),
            softdro: SoftDroOptions::default(),
            episode: EpisodePatch::default(),
            sampler: SamplerPatch::default(),
            ablation: AblationOptions::default(),
            trace: TraceOptions::default(),
            scale: ScaleOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvdroOptions {
    pub gamma: f64,
    /// Defaults to the environment's SVGD step size.
    pub alpha: Option<f64>,
    pub kernel: String,
    /// Defaults to the environment's kernel bandwidth.
    pub bandwidth: Option<f64>,
}

impl Default for SvdroOptions {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            alpha: None,
            kernel: "rbf".into(),
            bandwidth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoftDroOptions {
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for SoftDroOptions {
    fn default() -> Self {
        Self {
            beta: 1.0,
            epsilon: 0.1,
        }
    }
}

/// Optional replacements for [`EpisodeConfig`] fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodePatch {
    pub total_steps: Option<usize>,
    pub execution_window: Option<usize>,
    pub observation_noise: Option<bool>,
    pub svgd_iterations: Option<usize>,
    pub posterior_temperature: Option<f64>,
    pub likelihood_sign: Option<f64>,
    pub median_bandwidth: Option<bool>,
    pub dwell_steps: Option<usize>,
}

impl EpisodePatch {
    fn apply(&self, e: &mut EpisodeConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { e.$f = v; })* };
        }
        set!(
            total_steps,
            execution_window,
            observation_noise,
            svgd_iterations,
            posterior_temperature,
            likelihood_sign,
            median_bandwidth,
            dwell_steps
        );
    }
}

/// Optional replacements for [`SamplerConfig`] fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerPatch {
    pub samples: Option<usize>,
    pub noise_std: Option<Vec<f64>>,
    pub noise_correlation: Option<f64>,
    pub temperature: Option<f64>,
    pub relative_temperature: Option<bool>,
    pub horizon_steps: Option<usize>,
    pub iterations: Option<usize>,
    pub warm_start_shift: Option<bool>,
}

impl SamplerPatch {
    fn apply(&self, s: &mut SamplerConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        set!(
            samples,
            noise_correlation,
            temperature,
            relative_temperature,
            horizon_steps,
            iterations,
            warm_start_shift
        );
        if let Some(n) = &self.noise_std {
            s.noise_std = n.clone();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationOptions {
    pub kernels: Vec<String>,
}

impl Default for AblationOptions {
    fn default() -> Self {
        Self {
            kernels: KERNELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceOptions {
    /// `objective`, `particles` or `discrepancy`.
    pub mode: String,
    /// Controller seeds per trial in objective mode.
    pub seeds: usize,
    /// Paired trials in objective and discrepancy modes.
    pub trials: usize,
    /// Solver iterations against the frozen plant.
    pub iterations: usize,
    /// Prior-mean offsets from θ*, as fractions of the prior width.
    pub offsets: Vec<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            mode: "objective".into(),
            seeds: 5,
            trials: 5,
            iterations: 30,
            offsets: vec![0.0, 0.1, 0.2, 0.3, 0.4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleOptions {
    /// `particles` or `horizon`.
    pub axis: String,
    /// Axis values; empty picks a default sweep for the axis.
    pub values: Vec<usize>,
    pub repetitions: usize,
    pub warmup: usize,
    /// Worker count of the parallel sweep; the serial sweep always runs.
    pub workers: usize,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self {
            axis: "particles".into(),
            values: Vec::new(),
            repetitions: 20,
            warmup: 3,
            workers: 8,
        }
    }
}

impl ScaleOptions {
    pub fn sweep(&self) -> Vec<usize> {
        if !self.values.is_empty() {
            return self.values.clone();
        }
        match self.axis.as_str() {
            "horizon" => vec![5, 10, 15, 20, 25, 30],
            _ => vec![1, 2, 4, 8, 16, 32],
        }
    }
}

/// Splits `key=value`. The value is read as a TOML value when it parses as
/// one and as a bare string otherwise, so `env=tray` and `trials=8` both work.
pub fn parse_override(text: &str) -> BenchResult<(Vec<String>, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| invalid(format!("override `{text}` is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.to_string()).collect();
    if path
        .iter()
        .any(|p| p.is_empty() || !p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
    {
        return Err(invalid(format!("override key `{key}` is not a dotted identifier")));
    }
    let raw = raw.trim();
    let value = match raw.parse::<Value>() {
        Ok(v) => v,
        Err(_) if !raw.is_empty() && !raw.contains(['"', '\'', '[', ']', '{', '}', '\n']) => {
            Value::String(raw.to_string())
        }
        Err(e) => return Err(invalid(format!("override `{text}`: {e}"))),
    };
    Ok((path, value))
}

/// Sets `path` in `table`, creating intermediate tables.
pub fn set_path(table: &mut Table, path: &[String], value: Value) -> BenchResult<()> {
    let (last, parents) = path.split_last().ok_or_else(|| invalid("empty override key"))?;
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(invalid(format!("`{p}` is not a table in `{}`", path.join(".")))),
        };
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn parse_table(text: &str) -> BenchResult<Table> {
    text.parse::<Table>().map_err(|e| invalid(format!("config: {e}")))
}

impl RunConfig {
    /// Parses a config document.
    pub fn from_toml(text: &str) -> BenchResult<Self> {
        Self::from_table(parse_table(text)?)
    }

    pub fn from_table(table: Table) -> BenchResult<Self> {
        Self::deserialize(Value::Table(table)).map_err(|e| invalid(format!("config: {e}")))
    }

    /// Reads `file` (if any), applies `patches` in order and deserializes.
    pub fn load(file: Option<&Path>, patches: &[(Vec<String>, Value)]) -> BenchResult<Self> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| invalid(format!("reading {}: {e}", p.display())))?;
                parse_table(&text)?
            }
            None => Table::new(),
        };
        for (path, value) in patches {
            set_path(&mut table, path, value.clone())?;
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> BenchResult<String> {
        toml::to_string(self).map_err(|e| BenchError::Runtime(format!("encoding config: {e}")))
    }

    /// `out`, else `$SVDRO_OUT_DIR`, else `./svdro-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_VAR).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn env_spec(&self) -> BenchResult<EnvSpec> {
        let mut env = match &self.env_file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| invalid(format!("reading {}: {e}", p.display())))?;
                EnvSpec::from_toml(&text)?
            }
            None => EnvSpec::by_name(&self.env)?,
        };
        if let Some(n) = self.particles {
            env.particle_count = n;
        }
        env.validate()?;
        Ok(env)
    }

    pub fn kernel(&self, name: &str, env: &EnvSpec) -> BenchResult<KernelKind> {
        let h = self.svdro.bandwidth.unwrap_or(env.kernel_bandwidth);
        Ok(KernelKind::from_name(name, h)?)
    }

    pub fn controller_kind(&self, name: &str, env: &EnvSpec) -> BenchResult<ControllerKind> {
        let kind = match ControllerKind::from_name(name, env)? {
            ControllerKind::Svdro { .. } => ControllerKind::Svdro {
                gamma: self.svdro.gamma,
                alpha: self.svdro.alpha.unwrap_or(env.svgd_step_size),
                kernel: self.kernel(&self.svdro.kernel, env)?,
            },
            ControllerKind::SoftDro { .. } => ControllerKind::SoftDro {
                beta: self.softdro.beta,
                epsilon: self.softdro.epsilon,
            },
            k => k,
        };
        kind.validate()?;
        Ok(kind)
    }

    /// Checks everything and builds the environment, settings and
    /// controllers the commands run with.
    pub fn resolve(&self) -> BenchResult<Resolved> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers must be at least 1"));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(invalid("thresholds must be positive"));
        }
        if self.controllers.is_empty() {
            return Err(invalid("no controllers selected"));
        }
        let env = self.env_spec()?;
        let mut settings = Settings::for_env(&env);
        settings.episode.thresholds = self.thresholds.clone();
        self.episode.apply(&mut settings.episode);
        self.sampler.apply(&mut settings.sampler);
        settings.validate(&env)?;
        let controllers = self
            .controllers
            .iter()
            .map(|n| Ok((n.clone(), self.controller_kind(n, &env)?)))
            .collect::<BenchResult<Vec<_>>>()?;
        for k in &self.ablation.kernels {
            self.kernel(k, &env)?;
        }
        let pinned = match &self.true_params {
            Some(theta) => {
                if theta.len() != env.prior.dim() {
                    return Err(invalid(format!(
                        "true_params needs {} entries, got {}",
                        env.prior.dim(),
                        theta.len()
                    )));
                }
                if !env.prior.contains(theta) {
                    return Err(invalid("true_params lie outside the prior box"));
                }
                Some(env.params_from(theta))
            }
            None => None,
        };
        if !matches!(self.trace.mode.as_str(), "objective" | "particles" | "discrepancy") {
            return Err(invalid(format!("unknown trace mode `{}`", self.trace.mode)));
        }
        if self.trace.seeds == 0 || self.trace.trials == 0 || self.trace.iterations == 0 {
            return Err(invalid("trace seeds, trials and iterations must be positive"));
        }
        if self.trace.offsets.iter().any(|o| !(0.0..0.5).contains(o)) {
            return Err(invalid("trace offsets must lie in [0, 0.5) prior widths"));
        }
        if !matches!(self.scale.axis.as_str(), "particles" | "horizon") {
            return Err(invalid(format!("unknown scaling axis `{}`", self.scale.axis)));
        }
        if self.scale.sweep().contains(&0) {
            return Err(invalid("scaling axis values must be positive"));
        }
        if self.scale.repetitions == 0 || self.scale.workers == 0 {
            return Err(invalid("scaling repetitions and workers must be positive"));
        }
        Ok(Resolved {
            cfg: self.clone(),
            env,
            settings,
            controllers,
            pinned,
        })
    }
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub cfg: RunConfig,
    pub env: EnvSpec,
    pub settings: Settings,
    /// (name, kind) in config order.
    pub controllers: Vec<(String, ControllerKind)>,
    pub pinned: Option<PhysParams>,
}
