//! Run configuration: a flat TOML file, command-line overrides and defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tonewalk_core::experiments::{ExperimentConfig, Sweep, DEFAULT_MAX_ATTEMPTS};
use tonewalk_core::prelude::*;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Noise,
    RandomWalk,
    MeanReverting,
    Explosive,
    WideJumps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    Uniform,
    Normal,
}

impl From<JumpKind> for JumpModel {
    fn from(j: JumpKind) -> Self {
        match j {
            JumpKind::Uniform => JumpModel::UniformTernary,
            JumpKind::Normal => JumpModel::RoundedNormal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SidakChoice {
    #[serde(rename = "J")]
    J,
    #[serde(rename = "J+1")]
    JPlusOne,
}

impl From<SidakChoice> for SidakExponent {
    fn from(s: SidakChoice) -> Self {
        match s {
            SidakChoice::J => SidakExponent::Tests,
            SidakChoice::JPlusOne => SidakExponent::TestsPlusOne,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Blocks,
    SamplePeriod,
}

/// Every key a config file may set. Absent keys take the defaults of
/// [`RunConfig::default`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_per_block: Option<usize>,
    n_blocks: Option<usize>,
    sample_period: Option<f64>,
    snr_db: Option<f64>,
    amplitude: Option<f64>,
    noise_variance: Option<f64>,
    initial_phase: Option<f64>,
    scenario: Option<ScenarioKind>,
    jump_model: Option<JumpKind>,
    rho: Option<f64>,
    jump_scale: Option<f64>,
    start_bin: Option<i64>,
    displacement: Option<bool>,
    max_attempts: Option<usize>,
    alpha: Option<f64>,
    j_lags: Option<usize>,
    lags: Option<Vec<usize>>,
    sidak_exponent: Option<SidakChoice>,
    classical_vr_scaling: Option<bool>,
    seed: Option<u64>,
    trials: Option<usize>,
    alphas: Option<Vec<f64>>,
    analytical_only: Option<bool>,
    n_grid: Option<Vec<usize>>,
    jump_models: Option<Vec<JumpKind>>,
    sweep: Option<SweepKind>,
    sweep_values: Option<Vec<f64>>,
}

/// Fully resolved configuration, as echoed into manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_per_block: usize,
    pub n_blocks: usize,
    pub sample_period: f64,
    pub amplitude: f64,
    pub noise_variance: f64,
    pub initial_phase: f64,
    pub scenario: ScenarioKind,
    pub jump_model: JumpKind,
    pub rho: f64,
    pub jump_scale: f64,
    pub start_bin: i64,
    pub displacement: bool,
    pub max_attempts: usize,
    pub alpha: f64,
    pub j_lags: usize,
    pub lags: Option<Vec<usize>>,
    pub sidak_exponent: SidakChoice,
    pub classical_vr_scaling: bool,
    pub seed: u64,
    pub trials: usize,
    pub alphas: Vec<f64>,
    pub analytical_only: bool,
    pub n_grid: Vec<usize>,
    pub jump_models: Vec<JumpKind>,
    pub sweep: SweepKind,
    pub sweep_values: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_per_block: 64,
            n_blocks: 16,
            sample_period: 1.0,
            amplitude: 1.0,
            noise_variance: 1.0,
            initial_phase: 0.0,
            scenario: ScenarioKind::RandomWalk,
            jump_model: JumpKind::Normal,
            rho: 0.9,
            jump_scale: 1.0,
            start_bin: 0,
            displacement: true,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            alpha: 0.05,
            j_lags: 7,
            lags: None,
            sidak_exponent: SidakChoice::J,
            classical_vr_scaling: false,
            seed: 0,
            trials: 1000,
            alphas: (1..=10).map(|i| i as f64 / 20.0).collect(),
            analytical_only: false,
            n_grid: vec![16, 32, 64, 128],
            jump_models: vec![JumpKind::Normal, JumpKind::Uniform],
            sweep: SweepKind::Blocks,
            sweep_values: vec![11.0, 16.0, 32.0, 64.0],
        }
    }
}

/// 1-based line and column of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Position of `key = ...` in the source, or 1:1 for defaulted keys.
fn key_position(src: &str, key: &str) -> (usize, usize) {
    for (i, line) in src.lines().enumerate() {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return (i + 1, line.len() - t.len() + 1);
            }
        }
    }
    (1, 1)
}

/// Config key responsible for a parameter error from the core crate.
fn param_key(e: &tonewalk_core::Error, fallback: &'static str) -> &'static str {
    match e {
        tonewalk_core::Error::InvalidParameter { name, .. } => match *name {
            "scale" => "jump_scale",
            "noise_variance" => "noise_variance",
            "initial_phase" => "initial_phase",
            "rho" => "rho",
            "amplitude" => "amplitude",
            _ => fallback,
        },
        _ => fallback,
    }
}

/// A config file's text together with where it came from, for diagnostics.
pub struct ConfigSource<'a> {
    pub path: &'a Path,
    pub text: &'a str,
}

impl ConfigSource<'_> {
    fn error_at(&self, key: &str, message: impl Into<String>) -> CliError {
        let (line, column) = key_position(self.text, key);
        CliError::Config { path: self.path.to_path_buf(), line, column, message: message.into() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&ConfigSource { path, text: &text })
    }

    pub fn parse(src: &ConfigSource<'_>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(src.text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(src.text, s.start));
            CliError::Config { path: src.path.to_path_buf(), line, column, message: e.message().to_string() }
        })?;
        let d = RunConfig::default();
        let (amplitude, noise_variance) = match (raw.snr_db, raw.amplitude, raw.noise_variance) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(src.error_at("snr_db", "set either snr_db or amplitude/noise_variance, not both"));
            }
            (Some(db), None, None) => {
                let p = SignalParams::from_snr_db(db).map_err(|e| src.error_at("snr_db", e.to_string()))?;
                (p.amplitude(), p.noise_variance())
            }
            (None, a, n) => (a.unwrap_or(d.amplitude), n.unwrap_or(d.noise_variance)),
        };
        let cfg = RunConfig {
            n_per_block: raw.n_per_block.unwrap_or(d.n_per_block),
            n_blocks: raw.n_blocks.unwrap_or(d.n_blocks),
            sample_period: raw.sample_period.unwrap_or(d.sample_period),
            amplitude,
            noise_variance,
            initial_phase: raw.initial_phase.unwrap_or(d.initial_phase),
            scenario: raw.scenario.unwrap_or(d.scenario),
            jump_model: raw.jump_model.unwrap_or(d.jump_model),
            rho: raw.rho.unwrap_or(match raw.scenario {
                Some(ScenarioKind::Explosive) => 1.05,
                _ => d.rho,
            }),
            jump_scale: raw.jump_scale.unwrap_or(d.jump_scale),
            start_bin: raw.start_bin.unwrap_or(d.start_bin),
            displacement: raw.displacement.unwrap_or(d.displacement),
            max_attempts: raw.max_attempts.unwrap_or(d.max_attempts),
            alpha: raw.alpha.unwrap_or(d.alpha),
            j_lags: raw.j_lags.unwrap_or(d.j_lags),
            lags: raw.lags,
            sidak_exponent: raw.sidak_exponent.unwrap_or(d.sidak_exponent),
            classical_vr_scaling: raw.classical_vr_scaling.unwrap_or(d.classical_vr_scaling),
            seed: raw.seed.unwrap_or(d.seed),
            trials: raw.trials.unwrap_or(d.trials),
            alphas: raw.alphas.unwrap_or(d.alphas),
            analytical_only: raw.analytical_only.unwrap_or(d.analytical_only),
            n_grid: raw.n_grid.unwrap_or(d.n_grid),
            jump_models: raw.jump_models.unwrap_or(d.jump_models),
            sweep: raw.sweep.unwrap_or(d.sweep),
            sweep_values: raw.sweep_values.unwrap_or(d.sweep_values),
        };
        cfg.validate_with(src)?;
        Ok(cfg)
    }

    /// Check every value, attributing failures to the key that caused them.
    fn validate_with(&self, src: &ConfigSource<'_>) -> Result<()> {
        let at = |key: &str, e: tonewalk_core::Error| src.error_at(key, e.to_string());
        if self.n_per_block < 2 {
            return Err(src.error_at("n_per_block", "n_per_block must be at least 2"));
        }
        if self.n_blocks < 2 {
            return Err(src.error_at("n_blocks", "n_blocks must be at least 2"));
        }
        self.block_config().map_err(|e| at("sample_period", e))?;
        SignalParams::new(self.amplitude, self.noise_variance, self.initial_phase)
            .map_err(|e| at(param_key(&e, "amplitude"), e))?;
        self.scenario().validate().map_err(|e| at(param_key(&e, "scenario"), e))?;
        self.detector_settings().alpha_star().map_err(|e| at("alpha", e))?;
        if self.trials == 0 {
            return Err(src.error_at("trials", "trials must be positive"));
        }
        if self.max_attempts == 0 {
            return Err(src.error_at("max_attempts", "max_attempts must be positive"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(src.error_at("alphas", format!("level {a} outside (0, 1)")));
        }
        if self.alphas.is_empty() {
            return Err(src.error_at("alphas", "alphas must not be empty"));
        }
        if let Some(lags) = &self.lags {
            if lags.is_empty() {
                return Err(src.error_at("lags", "lags must not be empty"));
            }
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 2) {
            return Err(src.error_at("n_grid", format!("block size {n} is below 2")));
        }
        let bad_sweep = match self.sweep {
            SweepKind::Blocks => self.sweep_values.iter().any(|v| !(v.fract() == 0.0 && *v >= 2.0)),
            SweepKind::SamplePeriod => self.sweep_values.iter().any(|v| !(v.is_finite() && *v > 0.0)),
        };
        if bad_sweep {
            return Err(src.error_at("sweep_values", "sweep values do not fit the swept parameter"));
        }
        Ok(())
    }

    pub fn block_config(&self) -> tonewalk_core::Result<BlockConfig> {
        BlockConfig::new(self.n_per_block, self.n_blocks, self.sample_period)
    }

    pub fn signal_params(&self) -> tonewalk_core::Result<SignalParams> {
        SignalParams::new(self.amplitude, self.noise_variance, self.initial_phase)
    }

    pub fn scenario(&self) -> Scenario {
        match self.scenario {
            ScenarioKind::Noise => Scenario::NoiseOnly,
            ScenarioKind::RandomWalk => Scenario::RandomWalk { jumps: self.jump_model.into() },
            ScenarioKind::MeanReverting => Scenario::MeanReverting { rho: self.rho, scale: self.jump_scale },
            ScenarioKind::Explosive => Scenario::Explosive { rho: self.rho, scale: self.jump_scale },
            ScenarioKind::WideJumps => Scenario::WideJumps,
        }
    }

    pub fn pivot_options(&self) -> PivotOptions {
        PivotOptions { start_bin: self.start_bin, include_displacement: self.displacement }
    }

    pub fn scaling(&self) -> VrScaling {
        if self.classical_vr_scaling {
            VrScaling::Classical
        } else {
            VrScaling::AsPrinted
        }
    }

    pub fn detector_settings(&self) -> DetectorSettings {
        DetectorSettings {
            alpha: self.alpha,
            j_lags: self.j_lags,
            lags: self.lags.clone(),
            sidak: self.sidak_exponent.into(),
            scaling: self.scaling(),
        }
    }

    pub fn experiment(&self) -> tonewalk_core::Result<ExperimentConfig> {
        let mut e = ExperimentConfig::new(self.block_config()?, self.signal_params()?, self.trials, self.seed);
        e.jump_model = self.jump_model.into();
        e.j_lags = self.j_lags;
        e.alphas = self.alphas.clone();
        e.sidak = self.sidak_exponent.into();
        e.scaling = self.scaling();
        e.pivot_options = self.pivot_options();
        e.max_attempts = self.max_attempts;
        Ok(e)
    }

    pub fn sweep(&self) -> Sweep {
        match self.sweep {
            SweepKind::Blocks => Sweep::Blocks(self.sweep_values.iter().map(|&v| v as usize).collect()),
            SweepKind::SamplePeriod => Sweep::SamplePeriod(self.sweep_values.clone()),
        }
    }
}
