//! Analytical and Monte-Carlo detection curves and the convergence studies.
//!
//! Every trial draws from its own substream, keyed by the master seed, a
//! per-study slot and the trial index, so results do not depend on how many
//! rayon workers run them. Statistics that do not depend on the test level
//! (`Z0`, `V1`) are computed once per trial and thresholded for every level on
//! the grid, so all points of a curve share the same trials.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BlockConfig, SignalParams};
use crate::detectors::{
    chow_denning, controlled_variations_test, first_differences, verdict_for, VrScaling, MIN_BLOCKS,
};
use crate::error::{Error, Result};
use crate::rng::{substream_in_slot, Stream};
use crate::signal::{simulate_record, Hypothesis, JumpModel, PivotOptions, Scenario};
use crate::spectral::estimate_carriers;
use crate::stats::{
    moments, normal_cdf, normal_quantile, sigma0_sq, sigma1_sq, DiffSeries, SidakExponent,
};

/// Default cap on headroom rejections per trial.
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub config: BlockConfig,
    pub params: SignalParams,
    pub jump_model: JumpModel,
    pub j_lags: usize,
    pub alphas: Vec<f64>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub sidak: SidakExponent,
    pub scaling: VrScaling,
    pub pivot_options: PivotOptions,
    pub max_attempts: usize,
}

impl ExperimentConfig {
    /// Rounded-normal jumps, `J = 7` and an even grid of ten levels.
    pub fn new(config: BlockConfig, params: SignalParams, n_trials: usize, master_seed: u64) -> Self {
        Self {
            config,
            params,
            jump_model: JumpModel::RoundedNormal,
            j_lags: 7,
            alphas: (1..=10).map(|i| i as f64 / 20.0).collect(),
            n_trials,
            master_seed,
            sidak: SidakExponent::Tests,
            scaling: VrScaling::AsPrinted,
            pivot_options: PivotOptions::default(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.config.n_blocks();
        if k < MIN_BLOCKS {
            return Err(Error::TooFewBlocks { required: MIN_BLOCKS, actual: k });
        }
        if self.j_lags == 0 || self.j_lags + 1 > k / 2 {
            return Err(Error::param("j_lags", format!("J = {} needs 1 <= J <= {}", self.j_lags, k / 2 - 1)));
        }
        if self.alphas.is_empty() {
            return Err(Error::param("alphas", "empty level grid"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::param("alphas", format!("level {a} outside (0, 1)")));
        }
        Ok(())
    }

    pub fn lags(&self) -> Vec<usize> {
        (1..=self.j_lags).map(|j| j + 1).collect()
    }

    pub fn alpha_star(&self, alpha: f64) -> Result<f64> {
        self.sidak.alpha_star(alpha, self.j_lags)
    }

    fn require_trials(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::EmptyExperiment("n_trials is 0"));
        }
        Ok(())
    }
}

/// A successes-out-of-trials count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
}

impl Proportion {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        self.successes as f64 / self.trials as f64
    }

    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub fn stderr(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Standard error at `(x+1)/(n+2)`, which stays positive when every
    /// trial succeeds or fails.
    pub fn smoothed_stderr(&self) -> f64 {
        let n = self.trials as f64;
        let p = (self.successes as f64 + 1.0) / (n + 2.0);
        (p * (1.0 - p) / n).sqrt()
    }

    /// `|rate - target| <= z * smoothed_stderr`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.rate() - target).abs() <= z * self.smoothed_stderr()
    }
}

/// Level-free statistics of one simulated record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrialOutcome {
    Scored { z0: f64, v1: f64 },
    /// Constant differences; counted as stable with the random-walk test
    /// undecided.
    Degenerate,
    Failed,
}

/// Outcomes of a batch of trials in trial-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub outcomes: Vec<TrialOutcome>,
    pub rejected_pivots: usize,
    pub first_error: Option<String>,
}

/// Counts of a batch reduced at one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    /// Indexed by [`Hypothesis::index`].
    pub verdicts: [usize; 4],
    pub degenerate: usize,
    pub failed: usize,
}

impl VerdictCounts {
    pub fn scored(&self) -> usize {
        self.verdicts.iter().sum()
    }

    pub fn total(&self) -> usize {
        self.scored() + self.degenerate + self.failed
    }

    pub fn rate(&self, h: Hypothesis) -> Proportion {
        Proportion { successes: self.verdicts[h.index()], trials: self.total() - self.failed }
    }

    /// Most frequent verdict; ties go to the lower hypothesis.
    pub fn modal(&self) -> Hypothesis {
        let mut best = Hypothesis::H0;
        for h in Hypothesis::ALL {
            if self.verdicts[h.index()] > self.verdicts[best.index()] {
                best = h;
            }
        }
        best
    }
}

impl TrialBatch {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| matches!(o, TrialOutcome::Failed)).count()
    }

    pub fn degenerate(&self) -> usize {
        self.outcomes.iter().filter(|o| matches!(o, TrialOutcome::Degenerate)).count()
    }

    /// `P(Z0 < Phi^-1(alpha_star))` over the trials that did not fail.
    pub fn stable_rate(&self, alpha_star: f64) -> Result<Proportion> {
        let gamma = normal_quantile(alpha_star)?;
        let mut p = Proportion { successes: 0, trials: 0 };
        for o in &self.outcomes {
            match *o {
                TrialOutcome::Scored { z0, .. } => {
                    p.trials += 1;
                    p.successes += usize::from(z0 < gamma);
                }
                TrialOutcome::Degenerate => {
                    p.trials += 1;
                    p.successes += 1;
                }
                TrialOutcome::Failed => {}
            }
        }
        Ok(p)
    }

    /// `P(V1 > Phi^-1(1 - alpha_star/2))` over scored trials.
    pub fn reject_rate(&self, alpha_star: f64) -> Result<Proportion> {
        let gamma = normal_quantile(1.0 - alpha_star / 2.0)?;
        let mut p = Proportion { successes: 0, trials: 0 };
        for o in &self.outcomes {
            if let TrialOutcome::Scored { v1, .. } = *o {
                p.trials += 1;
                p.successes += usize::from(v1 > gamma);
            }
        }
        Ok(p)
    }

    pub fn verdicts(&self, alpha_star: f64) -> Result<VerdictCounts> {
        let g1 = normal_quantile(alpha_star)?;
        let g2 = normal_quantile(1.0 - alpha_star / 2.0)?;
        let mut c = VerdictCounts { verdicts: [0; 4], degenerate: 0, failed: 0 };
        for o in &self.outcomes {
            match *o {
                TrialOutcome::Scored { z0, v1 } => c.verdicts[verdict_for(z0 < g1, v1 > g2).index()] += 1,
                TrialOutcome::Degenerate => c.degenerate += 1,
                TrialOutcome::Failed => c.failed += 1,
            }
        }
        Ok(c)
    }

    pub fn summary(&self) -> BatchSummary {
        BatchSummary {
            trials: self.outcomes.len(),
            degenerate: self.degenerate(),
            failed: self.failed(),
            rejected_pivots: self.rejected_pivots,
            first_error: self.first_error.clone(),
        }
    }
}

/// Bookkeeping for a batch, kept next to every result table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trials: usize,
    pub degenerate: usize,
    pub failed: usize,
    pub rejected_pivots: usize,
    pub first_error: Option<String>,
}

/// `Z0` and `V1` of one difference series.
pub fn level_free_statistics(
    series: &DiffSeries,
    config: &BlockConfig,
    lags: &[usize],
    scaling: VrScaling,
) -> Result<(f64, f64)> {
    // Any level gives the same statistics; only the thresholds change.
    let cvt = controlled_variations_test(series, config, 0.5)?;
    let vrt = chow_denning(series, lags, 0.5, scaling)?;
    Ok((cvt.z0, vrt.v1))
}

struct Trial {
    outcome: TrialOutcome,
    rejected: usize,
    error: Option<Error>,
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    cfg: &ExperimentConfig,
    config: &BlockConfig,
    params: &SignalParams,
    scenario: &Scenario,
    lags: &[usize],
    tag: Stream,
    slot: u64,
    index: usize,
) -> Trial {
    let mut rng = substream_in_slot(cfg.master_seed, tag, slot, index as u64);
    let mut run = || -> Result<(TrialOutcome, usize)> {
        let (record, rejected) =
            simulate_record(config, params, scenario, &cfg.pivot_options, &mut rng, cfg.max_attempts)?;
        let series = first_differences(&estimate_carriers(&record, config)?)?;
        match level_free_statistics(&series, config, lags, cfg.scaling) {
            Ok((z0, v1)) => Ok((TrialOutcome::Scored { z0, v1 }, rejected)),
            Err(e) if e.is_degenerate() => Ok((TrialOutcome::Degenerate, rejected)),
            Err(e) => Err(e),
        }
    };
    match run() {
        Ok((outcome, rejected)) => Trial { outcome, rejected, error: None },
        Err(e) => Trial { outcome: TrialOutcome::Failed, rejected: 0, error: Some(e) },
    }
}

/// Run `cfg.n_trials` full pipelines under `scenario`.
///
/// `config` and `params` override the ones in `cfg` so sweeps can reuse it.
pub fn run_batch(
    cfg: &ExperimentConfig,
    config: &BlockConfig,
    params: &SignalParams,
    scenario: &Scenario,
    tag: Stream,
    slot: u64,
) -> Result<TrialBatch> {
    cfg.require_trials()?;
    scenario.validate()?;
    let lags = cfg.lags();
    let trials: Vec<Trial> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, config, params, scenario, &lags, tag, slot, i))
        .collect();
    let rejected_pivots = trials.iter().map(|t| t.rejected).sum();
    let first_error = trials.iter().find_map(|t| t.error.as_ref().map(|e| e.to_string()));
    Ok(TrialBatch { outcomes: trials.into_iter().map(|t| t.outcome).collect(), rejected_pivots, first_error })
}

/// `Phi(c Phi^-1(alpha_star) + (c - 1)(1 - s^2)/s)` with
/// `c = cbrt(sigma0^2 / sigma1^2)` and `s^2 = 2/(9(K-2))`.
pub fn pd_from_variances(alpha_star: f64, sigma0_sq: f64, sigma1_sq: f64, n_blocks: usize) -> Result<f64> {
    if n_blocks < MIN_BLOCKS {
        return Err(Error::TooFewBlocks { required: MIN_BLOCKS, actual: n_blocks });
    }
    if !(sigma0_sq > 0.0 && sigma1_sq > 0.0) {
        return Err(Error::param("sigma_sq", "variances must be positive"));
    }
    let c = (sigma0_sq / sigma1_sq).cbrt();
    let s2 = 2.0 / (9.0 * (n_blocks as f64 - 2.0));
    let s = s2.sqrt();
    Ok(normal_cdf(c * normal_quantile(alpha_star)? + (c - 1.0) * (1.0 - s2) / s))
}

/// Closed-form probability that the controlled-variations test calls a
/// rounded-normal random walk stable at family level `alpha`.
pub fn analytical_pd(alpha: f64, j: usize, exponent: SidakExponent, config: &BlockConfig, snr: f64) -> Result<f64> {
    let alpha_star = exponent.alpha_star(alpha, j)?;
    let s1 = sigma1_sq(config, snr, JumpModel::RoundedNormal)?;
    pd_from_variances(alpha_star, sigma0_sq(config), s1, config.n_blocks())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub alpha: f64,
    pub alpha_star: f64,
    pub pd: f64,
    /// Binomial standard error; `None` for closed-form points.
    pub pd_stderr: Option<f64>,
    pub pfa_empirical: Option<f64>,
    pub pfa_stderr: Option<f64>,
}

/// One closed-form point per level of the grid.
pub fn analytical_roc(cfg: &ExperimentConfig) -> Result<Vec<RocPoint>> {
    cfg.validate()?;
    let s0 = sigma0_sq(&cfg.config);
    let s1 = sigma1_sq(&cfg.config, cfg.params.snr(), cfg.jump_model)?;
    cfg.alphas
        .iter()
        .map(|&alpha| {
            let alpha_star = cfg.alpha_star(alpha)?;
            Ok(RocPoint {
                alpha,
                alpha_star,
                pd: pd_from_variances(alpha_star, s0, s1, cfg.config.n_blocks())?,
                pd_stderr: None,
                pfa_empirical: None,
                pfa_stderr: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRoc {
    pub points: Vec<RocPoint>,
    pub analytical: Vec<RocPoint>,
    /// Per level: empirical P_D within three standard errors of the closed
    /// form.
    pub within_band: Vec<bool>,
    /// Every level within its band.
    pub converged: bool,
    pub signal: BatchSummary,
    pub noise: BatchSummary,
}

/// Simulated detection and false-alarm rates of the controlled-variations
/// test, next to the closed-form curve.
pub fn empirical_roc(cfg: &ExperimentConfig) -> Result<EmpiricalRoc> {
    cfg.validate()?;
    cfg.require_trials()?;
    let analytical = analytical_roc(cfg)?;
    let walk = Scenario::RandomWalk { jumps: cfg.jump_model };
    let signal = run_batch(cfg, &cfg.config, &cfg.params, &walk, Stream::Trial, 0)?;
    let noise = run_batch(cfg, &cfg.config, &cfg.params, &Scenario::NoiseOnly, Stream::NoiseTrial, 0)?;
    let mut points = Vec::with_capacity(analytical.len());
    let mut within_band = Vec::with_capacity(analytical.len());
    for a in &analytical {
        let pd = signal.stable_rate(a.alpha_star)?;
        let pfa = noise.stable_rate(a.alpha_star)?;
        within_band.push(pd.within(a.pd, 3.0));
        points.push(RocPoint {
            alpha: a.alpha,
            alpha_star: a.alpha_star,
            pd: pd.rate(),
            pd_stderr: Some(pd.stderr()),
            pfa_empirical: Some(pfa.rate()),
            pfa_stderr: Some(pfa.stderr()),
        });
    }
    Ok(EmpiricalRoc {
        converged: within_band.iter().all(|&b| b),
        points,
        analytical,
        within_band,
        signal: signal.summary(),
        noise: noise.summary(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub alpha: f64,
    pub alpha_star: f64,
    pub target: Hypothesis,
    /// Rate of the target verdict.
    pub joint: Proportion,
    /// Rate of the H1 verdict, whatever the target.
    pub h1: Proportion,
    pub stable: Proportion,
    /// The random-walk factor matching the target: `V1 > threshold` for
    /// H2/H3 targets, `V1 <= threshold` otherwise.
    pub rwh_factor: Proportion,
    /// `P(stable) P(rwh factor)`, both estimated.
    pub product_empirical: f64,
    /// Closed-form `P_D` times the estimated random-walk factor.
    pub product_analytical: f64,
    pub counts: VerdictCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStudy {
    pub scenario: Scenario,
    pub points: Vec<JointPoint>,
    pub batch: BatchSummary,
}

/// Joint verdict rates under `scenario`, with the independence
/// (product-form) approximation for comparison.
pub fn joint_empirical_pd(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<JointStudy> {
    cfg.validate()?;
    let batch = run_batch(cfg, &cfg.config, &cfg.params, scenario, Stream::Trial, 1 + scenario_slot(scenario))?;
    let target = scenario.hypothesis();
    let wants_reject = matches!(target, Hypothesis::H2 | Hypothesis::H3);
    let wants_stable = matches!(target, Hypothesis::H1 | Hypothesis::H2);
    let mut points = Vec::with_capacity(cfg.alphas.len());
    for &alpha in &cfg.alphas {
        let alpha_star = cfg.alpha_star(alpha)?;
        let counts = batch.verdicts(alpha_star)?;
        let stable = batch.stable_rate(alpha_star)?;
        let reject = batch.reject_rate(alpha_star)?;
        let rwh_factor = if wants_reject {
            reject
        } else {
            Proportion { successes: reject.trials - reject.successes, trials: reject.trials }
        };
        let stable_factor = if wants_stable { stable.rate() } else { 1.0 - stable.rate() };
        let pd = analytical_pd(alpha, cfg.j_lags, cfg.sidak, &cfg.config, cfg.params.snr())?;
        let pd_factor = if wants_stable { pd } else { 1.0 - pd };
        points.push(JointPoint {
            alpha,
            alpha_star,
            target,
            joint: counts.rate(target),
            h1: counts.rate(Hypothesis::H1),
            stable,
            rwh_factor,
            product_empirical: stable_factor * rwh_factor.rate(),
            product_analytical: pd_factor * rwh_factor.rate(),
            counts,
        });
    }
    Ok(JointStudy { scenario: *scenario, points, batch: batch.summary() })
}

fn scenario_slot(s: &Scenario) -> u64 {
    match s {
        Scenario::NoiseOnly => 0,
        Scenario::RandomWalk { jumps: JumpModel::UniformTernary } => 1,
        Scenario::RandomWalk { jumps: JumpModel::RoundedNormal } => 2,
        Scenario::MeanReverting { .. } => 3,
        Scenario::Explosive { .. } => 4,
        Scenario::WideJumps => 5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub scenario: Scenario,
    pub truth: Hypothesis,
    pub counts: VerdictCounts,
    pub batch: BatchSummary,
}

/// Verdict counts at level `alpha`, one row per simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub alpha: f64,
    pub alpha_star: f64,
    pub rows: Vec<ConfusionRow>,
}

impl ConfusionMatrix {
    /// Each row's own hypothesis is (one of) its most frequent verdicts.
    pub fn is_diagonally_dominant(&self) -> bool {
        self.rows.iter().all(|r| {
            let d = r.counts.verdicts[r.truth.index()];
            r.counts.verdicts.iter().all(|&c| c <= d)
        })
    }
}

pub fn confusion_matrix(cfg: &ExperimentConfig, scenarios: &[Scenario], alpha: f64) -> Result<ConfusionMatrix> {
    cfg.validate()?;
    let alpha_star = cfg.alpha_star(alpha)?;
    let rows = scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let batch = run_batch(cfg, &cfg.config, &cfg.params, s, Stream::Trial, 16 + i as u64)?;
            Ok(ConfusionRow { scenario: *s, truth: s.hypothesis(), counts: batch.verdicts(alpha_star)?, batch: batch.summary() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConfusionMatrix { alpha, alpha_star, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofRow {
    pub n_per_block: usize,
    pub jump_model: JumpModel,
    pub mean_dof: f64,
    pub stderr: f64,
    pub median_dof: f64,
    /// `K - 2`, the limit for Gaussian differences.
    pub target: f64,
    pub trials: usize,
    pub batch: BatchSummary,
}

impl DofRow {
    pub fn relative_gap(&self) -> f64 {
        (self.mean_dof - self.target) / self.target
    }
}

/// Mean degrees-of-freedom estimate of H1 difference series for every
/// block size and jump model.
pub fn dof_convergence_study(cfg: &ExperimentConfig, n_grid: &[usize], models: &[JumpModel]) -> Result<Vec<DofRow>> {
    cfg.require_trials()?;
    let k = cfg.config.n_blocks();
    if k < MIN_BLOCKS {
        return Err(Error::TooFewBlocks { required: MIN_BLOCKS, actual: k });
    }
    if n_grid.is_empty() || models.is_empty() {
        return Err(Error::EmptyExperiment("empty block-size grid or jump-model list"));
    }
    let mut rows = Vec::new();
    for (gi, &n) in n_grid.iter().enumerate() {
        let config = cfg.config.with_n_per_block(n)?;
        for (mi, &model) in models.iter().enumerate() {
            let scenario = Scenario::RandomWalk { jumps: model };
            let slot = 32 + (gi * models.len() + mi) as u64;
            let trials: Vec<(Option<f64>, usize, Option<String>)> = (0..cfg.n_trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream_in_slot(cfg.master_seed, Stream::Trial, slot, i as u64);
                    let mut run = || -> Result<(f64, usize)> {
                        let (rec, rej) = simulate_record(
                            &config,
                            &cfg.params,
                            &scenario,
                            &cfg.pivot_options,
                            &mut rng,
                            cfg.max_attempts,
                        )?;
                        let series = first_differences(&estimate_carriers(&rec, &config)?)?;
                        Ok((moments(&series)?.dof, rej))
                    };
                    match run() {
                        Ok((d, rej)) => (Some(d), rej, None),
                        Err(e) => (None, 0, Some(e.to_string())),
                    }
                })
                .collect();
            let mut dofs: Vec<f64> = trials.iter().filter_map(|t| t.0).collect();
            let degenerate = trials.iter().filter(|t| t.2.as_deref().is_some_and(|s| s.contains("degenerate"))).count();
            let batch = BatchSummary {
                trials: trials.len(),
                degenerate,
                failed: trials.len() - dofs.len() - degenerate,
                rejected_pivots: trials.iter().map(|t| t.1).sum(),
                first_error: trials.iter().find_map(|t| t.2.clone()),
            };
            let m = dofs.len();
            let (mean_dof, stderr, median_dof) = if m == 0 {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let mean = dofs.iter().sum::<f64>() / m as f64;
                let var = dofs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (m.max(2) - 1) as f64;
                dofs.sort_by(f64::total_cmp);
                let median = if m % 2 == 1 { dofs[m / 2] } else { 0.5 * (dofs[m / 2 - 1] + dofs[m / 2]) };
                (mean, (var / m as f64).sqrt(), median)
            };
            rows.push(DofRow {
                n_per_block: n,
                jump_model: model,
                mean_dof,
                stderr,
                median_dof,
                target: k as f64 - 2.0,
                trials: m,
                batch,
            });
        }
    }
    Ok(rows)
}

/// Parameter swept by [`estimation_error_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sweep {
    Blocks(Vec<usize>),
    SamplePeriod(Vec<f64>),
}

impl Sweep {
    fn len(&self) -> usize {
        match self {
            Sweep::Blocks(v) => v.len(),
            Sweep::SamplePeriod(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationErrorRow {
    pub value: f64,
    pub rms_bins: f64,
    /// `rms_bins` as a percentage of `N`.
    pub percent_of_n: f64,
    pub blocks_scored: usize,
    pub batch: BatchSummary,
}

/// Circular distance in bins between each block's peak and the bin nearest
/// its true carrier (the mean of the two pivots bounding the block).
pub fn bin_errors(peak_bins: &[usize], pivot_freqs: &[f64], config: &BlockConfig) -> Result<Vec<usize>> {
    if pivot_freqs.len() != peak_bins.len() + 1 {
        return Err(Error::ShapeMismatch {
            expected: format!("{} pivots", peak_bins.len() + 1),
            actual: format!("{} pivots", pivot_freqs.len()),
        });
    }
    let n = config.n_per_block() as i64;
    let l = config.bin_width();
    Ok(peak_bins
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let fc = 0.5 * (pivot_freqs[k] + pivot_freqs[k + 1]);
            let truth = ((fc / l).round() as i64).rem_euclid(n);
            let d = (m as i64 - truth).rem_euclid(n);
            d.min(n - d) as usize
        })
        .collect())
}

/// RMS peak-bin error of H1 records as `K` or `T` is swept.
pub fn estimation_error_study(cfg: &ExperimentConfig, sweep: &Sweep) -> Result<Vec<EstimationErrorRow>> {
    cfg.require_trials()?;
    if sweep.len() == 0 {
        return Err(Error::EmptyExperiment("empty sweep"));
    }
    let scenario = Scenario::RandomWalk { jumps: cfg.jump_model };
    (0..sweep.len())
        .map(|si| {
            let (config, value) = match sweep {
                Sweep::Blocks(v) => (cfg.config.with_n_blocks(v[si])?, v[si] as f64),
                Sweep::SamplePeriod(v) => (cfg.config.with_sample_period(v[si])?, v[si]),
            };
            let slot = 64 + si as u64;
            let trials: Vec<std::result::Result<(u64, usize, usize), String>> = (0..cfg.n_trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream_in_slot(cfg.master_seed, Stream::Trial, slot, i as u64);
                    let mut run = || -> Result<(u64, usize, usize)> {
                        let (rec, rej) = simulate_record(
                            &config,
                            &cfg.params,
                            &scenario,
                            &cfg.pivot_options,
                            &mut rng,
                            cfg.max_attempts,
                        )?;
                        let est = estimate_carriers(&rec, &config)?;
                        let pivots = rec.provenance().expect("synthetic record");
                        let errs = bin_errors(&est.peak_bins, &pivots.pivot_freqs, &config)?;
                        Ok((errs.iter().map(|&e| (e * e) as u64).sum(), errs.len(), rej))
                    };
                    run().map_err(|e| e.to_string())
                })
                .collect();
            let (mut sq, mut count, mut rejected) = (0u64, 0usize, 0usize);
            for t in trials.iter().flatten() {
                sq += t.0;
                count += t.1;
                rejected += t.2;
            }
            let failed = trials.iter().filter(|t| t.is_err()).count();
            let rms = (sq as f64 / count as f64).sqrt();
            Ok(EstimationErrorRow {
                value,
                rms_bins: rms,
                percent_of_n: 100.0 * rms / config.n_per_block() as f64,
                blocks_scored: count,
                batch: BatchSummary {
                    trials: trials.len(),
                    degenerate: 0,
                    failed,
                    rejected_pivots: rejected,
                    first_error: trials.iter().find_map(|t| t.as_ref().err().cloned()),
                },
            })
        })
        .collect()
}
