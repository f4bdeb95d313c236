//! Controlled-variations test, LOMAC / Chow-Denning variance-ratio tests and
//! the joint four-way decision.

use serde::{Deserialize, Serialize};

use crate::config::BlockConfig;
use crate::error::{Error, Result};
use crate::signal::{BlockRecord, Hypothesis};
use crate::spectral::{estimate_carriers, CarrierEstimates};
use crate::stats::{moments, normal_quantile, sigma0_sq, wilson_hilferty, DiffSeries, SidakExponent};

pub use crate::signal::Hypothesis as Verdict;

/// Below this many blocks the degrees-of-freedom asymptotics do not hold.
pub const MIN_BLOCKS: usize = 11;

/// `f[k] - f[k-1]` for consecutive carrier estimates.
pub fn first_differences(est: &CarrierEstimates) -> Result<DiffSeries> {
    if est.len() < 2 {
        return Err(Error::param("estimates", format!("need at least 2 carriers, got {}", est.len())));
    }
    DiffSeries::new(est.carrier_freqs.windows(2).map(|w| w[1] - w[0]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvtResult {
    pub variance: f64,
    pub sigma0_sq: f64,
    pub kurtosis: f64,
    pub dof: f64,
    /// `dof * variance / sigma0_sq`.
    pub chi0_sq: f64,
    pub z0: f64,
    /// `Phi^-1(alpha_star)`.
    pub threshold: f64,
    pub alpha_star: f64,
    /// `z0 < threshold`: the differences vary far less than noise would.
    pub stable: bool,
}

/// One-sided test that the first differences are much less variable than the
/// noise-only value `sigma0_sq`.
pub fn controlled_variations_test(series: &DiffSeries, config: &BlockConfig, alpha_star: f64) -> Result<CvtResult> {
    if series.source_len() < MIN_BLOCKS {
        return Err(Error::TooFewBlocks { required: MIN_BLOCKS, actual: series.source_len() });
    }
    let threshold = normal_quantile(alpha_star)?;
    let m = moments(series)?;
    let s0 = sigma0_sq(config);
    let ratio = m.variance / s0;
    let z0 = wilson_hilferty(ratio, m.dof)?;
    Ok(CvtResult {
        variance: m.variance,
        sigma0_sq: s0,
        kurtosis: m.kurtosis,
        dof: m.dof,
        chi0_sq: m.dof * ratio,
        z0,
        threshold,
        alpha_star,
        stable: z0 < threshold,
    })
}

/// Normalisation of the variance ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum VrScaling {
    /// Sums without per-term averaging and `M1 = (VR - 1) / phi(tau)`.
    #[default]
    AsPrinted,
    /// Lo-MacKinlay: averaged sums over every complete window and
    /// `M1 = (VR - 1) / sqrt(phi(tau) / (K-1))`.
    Classical,
}

fn check_lag(series: &DiffSeries, lag: usize) -> Result<()> {
    let max = series.source_len() / 2;
    if lag < 2 || lag > max {
        return Err(Error::param("lag", format!("lag {lag} outside 2..={max}")));
    }
    Ok(())
}

/// Lag-`tau` variance ratio of the difference series.
///
/// With `y[k]` for `k = 1..K-1` and its mean `mu`, the printed form is
/// `sum_{k=tau}^{K-tau} (y[k] + ... + y[k-tau+1] - tau mu)^2 / tau` over
/// `sum_{k=1}^{K-1} (y[k] - mu)^2`.
pub fn variance_ratio(series: &DiffSeries, lag: usize, scaling: VrScaling) -> Result<f64> {
    check_lag(series, lag)?;
    let y = series.values();
    let k_src = series.source_len();
    let mu = series.mean();
    let den: f64 = y.iter().map(|v| (v - mu) * (v - mu)).sum();
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if den <= (scale * f64::EPSILON).powi(2) * 16.0 * y.len() as f64 {
        return Err(Error::Degenerate("constant series has zero variance"));
    }
    // y^(k) lives at y[k-1]; the window ending at k covers y[k-tau..k].
    let last = match scaling {
        VrScaling::AsPrinted => k_src - lag,
        VrScaling::Classical => k_src - 1,
    };
    let tau = lag as f64;
    let mut num = 0.0;
    for k in lag..=last {
        let s = y[k - lag..k].iter().sum::<f64>() - tau * mu;
        num += s * s / tau;
    }
    Ok(match scaling {
        VrScaling::AsPrinted => num / den,
        VrScaling::Classical => {
            let windows = (last - lag + 1) as f64;
            (num / windows) / (den / y.len() as f64)
        }
    })
}

/// Asymptotic variance `2(2 tau - 1)(tau - 1) / (3 tau)`.
pub fn lomac_phi(lag: usize) -> f64 {
    let t = lag as f64;
    2.0 * (2.0 * t - 1.0) * (t - 1.0) / (3.0 * t)
}

/// LOMAC statistic `M1(tau)`.
pub fn lomac_stat(series: &DiffSeries, lag: usize, scaling: VrScaling) -> Result<f64> {
    let vr = variance_ratio(series, lag, scaling)?;
    Ok(lomac_from_vr(vr, lag, series.len(), scaling))
}

fn lomac_from_vr(vr: f64, lag: usize, n_diffs: usize, scaling: VrScaling) -> f64 {
    let phi = lomac_phi(lag);
    match scaling {
        VrScaling::AsPrinted => (vr - 1.0) / phi,
        VrScaling::Classical => (vr - 1.0) / (phi / n_diffs as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrTestResult {
    pub lags: Vec<usize>,
    pub vr: Vec<f64>,
    pub m1: Vec<f64>,
    /// `max |M1|` over the lags.
    pub v1: f64,
    /// `Phi^-1(1 - alpha_star / 2)`.
    pub threshold: f64,
    pub alpha_star: f64,
    /// `v1 > threshold`: the random-walk hypothesis is rejected.
    pub reject_rwh: bool,
}

/// Chow-Denning multiple variance-ratio test over `lags`.
pub fn chow_denning(series: &DiffSeries, lags: &[usize], alpha_star: f64, scaling: VrScaling) -> Result<VrTestResult> {
    if lags.is_empty() {
        return Err(Error::param("lags", "empty lag set"));
    }
    for (i, &lag) in lags.iter().enumerate() {
        check_lag(series, lag)?;
        if lags[..i].contains(&lag) {
            return Err(Error::param("lags", format!("lag {lag} repeated")));
        }
    }
    let threshold = normal_quantile(1.0 - alpha_star / 2.0)?;
    let mut vr = Vec::with_capacity(lags.len());
    let mut m1 = Vec::with_capacity(lags.len());
    for &lag in lags {
        let r = variance_ratio(series, lag, scaling)?;
        vr.push(r);
        m1.push(lomac_from_vr(r, lag, series.len(), scaling));
    }
    let v1 = m1.iter().fold(0.0f64, |a, m| a.max(m.abs()));
    Ok(VrTestResult { lags: lags.to_vec(), vr, m1, v1, threshold, alpha_star, reject_rwh: v1 > threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDecision {
    pub verdict: Hypothesis,
    pub cvt: CvtResult,
    pub vrt: VrTestResult,
    pub alpha: f64,
    pub alpha_star: f64,
}

/// Table of the joint inference:
///
/// | CVT \ RWH      | not rejected | rejected |
/// |----------------|--------------|----------|
/// | not stable     | H0           | H3       |
/// | stable         | H1           | H2       |
pub fn verdict_for(stable: bool, reject_rwh: bool) -> Hypothesis {
    match (stable, reject_rwh) {
        (false, false) => Hypothesis::H0,
        (false, true) => Hypothesis::H3,
        (true, false) => Hypothesis::H1,
        (true, true) => Hypothesis::H2,
    }
}

pub fn joint_inference(cvt: CvtResult, vrt: VrTestResult, alpha: f64) -> JointDecision {
    debug_assert_eq!(cvt.alpha_star, vrt.alpha_star, "sub-tests run at different levels");
    JointDecision { verdict: verdict_for(cvt.stable, vrt.reject_rwh), alpha_star: cvt.alpha_star, cvt, vrt, alpha }
}

/// Level, lag set and variants used for a detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSettings {
    pub alpha: f64,
    /// Chow-Denning test size `J`; lags default to `2..=J+1`.
    pub j_lags: usize,
    /// Explicit lag set overriding the default.
    pub lags: Option<Vec<usize>>,
    pub sidak: SidakExponent,
    pub scaling: VrScaling,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self { alpha: 0.05, j_lags: 7, lags: None, sidak: SidakExponent::Tests, scaling: VrScaling::AsPrinted }
    }
}

impl DetectorSettings {
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn lag_set(&self) -> Vec<usize> {
        match &self.lags {
            Some(l) => l.clone(),
            None => (1..=self.j_lags).map(|j| j + 1).collect(),
        }
    }

    /// Size of the lag family used for the Sidak correction.
    pub fn family(&self) -> usize {
        self.lags.as_ref().map_or(self.j_lags, Vec::len)
    }

    pub fn alpha_star(&self) -> Result<f64> {
        self.sidak.alpha_star(self.alpha, self.family())
    }

    /// Check the lag set against a record of `n_blocks` blocks.
    pub fn validate(&self, n_blocks: usize) -> Result<()> {
        self.alpha_star()?;
        if n_blocks < MIN_BLOCKS {
            return Err(Error::TooFewBlocks { required: MIN_BLOCKS, actual: n_blocks });
        }
        let lags = self.lag_set();
        if lags.is_empty() {
            return Err(Error::param("lags", "empty lag set"));
        }
        let max = n_blocks / 2;
        if let Some(bad) = lags.iter().find(|&&l| l < 2 || l > max) {
            return Err(Error::param("lags", format!("lag {bad} outside 2..={max} for K={n_blocks}")));
        }
        Ok(())
    }
}

/// Run both tests on a difference series and combine them.
pub fn score(series: &DiffSeries, config: &BlockConfig, settings: &DetectorSettings) -> Result<JointDecision> {
    let alpha_star = settings.alpha_star()?;
    let cvt = controlled_variations_test(series, config, alpha_star)?;
    let vrt = chow_denning(series, &settings.lag_set(), alpha_star, settings.scaling)?;
    Ok(joint_inference(cvt, vrt, settings.alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Decided(JointDecision),
    /// Constant differences: the variations are as controlled as they can be
    /// but neither the kurtosis nor the variance ratio is defined.
    Degenerate { reason: String },
}

/// Everything computed for one record, from peak bins to verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub alpha: f64,
    pub alpha_star: f64,
    pub estimates: CarrierEstimates,
    pub differences: Vec<f64>,
    pub outcome: Outcome,
}

impl DetectionReport {
    pub fn decision(&self) -> Option<&JointDecision> {
        match &self.outcome {
            Outcome::Decided(d) => Some(d),
            Outcome::Degenerate { .. } => None,
        }
    }
}

/// Estimate carriers, difference them and run the joint inference.
///
/// A degenerate difference series is reported in the outcome rather than as
/// an error; invalid settings and shape mismatches are errors.
pub fn detect(record: &BlockRecord, config: &BlockConfig, settings: &DetectorSettings) -> Result<DetectionReport> {
    settings.validate(config.n_blocks())?;
    let alpha_star = settings.alpha_star()?;
    let estimates = estimate_carriers(record, config)?;
    let series = first_differences(&estimates)?;
    let outcome = match score(&series, config, settings) {
        Ok(d) => Outcome::Decided(d),
        Err(e) if e.is_degenerate() => Outcome::Degenerate { reason: e.to_string() },
        Err(e) => return Err(e),
    };
    Ok(DetectionReport { alpha: settings.alpha, alpha_star, estimates, differences: series.values().to_vec(), outcome })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: Vec<f64>) -> DiffSeries {
        DiffSeries::new(v).unwrap()
    }

    #[test]
    fn differences_of_ramps() {
        let est = CarrierEstimates { peak_bins: vec![0, 1, 2, 3], carrier_freqs: vec![0.0, 0.25, 0.5, 0.75] };
        assert_eq!(first_differences(&est).unwrap().values(), &[0.25, 0.25, 0.25]);
        let flat = CarrierEstimates { peak_bins: vec![2; 5], carrier_freqs: vec![0.5; 5] };
        assert!(first_differences(&flat).unwrap().values().iter().all(|&v| v == 0.0));
        let one = CarrierEstimates { peak_bins: vec![2], carrier_freqs: vec![0.5] };
        assert!(first_differences(&one).is_err());
    }

    #[test]
    fn phi_values() {
        assert_eq!(lomac_phi(2), 1.0);
        assert!((lomac_phi(3) - 20.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn lag_two_is_vr_minus_one() {
        let s = series(vec![0.3, -1.2, 0.8, 0.1, -0.4, 1.5, -0.9, 0.2, 0.6, -0.7]);
        let vr = variance_ratio(&s, 2, VrScaling::AsPrinted).unwrap();
        assert!((lomac_stat(&s, 2, VrScaling::AsPrinted).unwrap() - (vr - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn vr_by_hand() {
        // K = 5, y = [1, -1, 2, 0], mu = 0.5; tau = 2 sums k = 2..3:
        // (y1+y2-1)^2/2 + (y2+y3-1)^2/2 = 1/2 + 0 ; den = 0.25+2.25+2.25+0.25 = 5.
        let s = series(vec![1.0, -1.0, 2.0, 0.0]);
        assert!((variance_ratio(&s, 2, VrScaling::AsPrinted).unwrap() - 0.1).abs() < 1e-15);
        // Classical adds k = 4: (y3+y4-1)^2/2 = 0.5, averages: (1/3) / (5/4).
        let c = variance_ratio(&s, 2, VrScaling::Classical).unwrap();
        assert!((c - (1.0 / 3.0) / 1.25).abs() < 1e-15);
    }

    #[test]
    fn lag_and_degenerate_errors() {
        let s = series(vec![0.1, 0.4, -0.3, 0.2, 0.0, 0.5, -0.2, 0.3]);
        assert!(variance_ratio(&s, 1, VrScaling::AsPrinted).is_err());
        assert!(variance_ratio(&s, 5, VrScaling::AsPrinted).is_err());
        assert!(variance_ratio(&s, 4, VrScaling::AsPrinted).is_ok());
        let flat = series(vec![0.7; 8]);
        assert!(matches!(variance_ratio(&flat, 2, VrScaling::AsPrinted), Err(Error::Degenerate(_))));
        assert!(chow_denning(&s, &[], 0.01, VrScaling::AsPrinted).is_err());
        assert!(chow_denning(&s, &[2, 2], 0.01, VrScaling::AsPrinted).is_err());
    }

    #[test]
    fn single_lag_chow_denning() {
        let s = series(vec![0.1, 0.4, -0.3, 0.2, 0.0, 0.5, -0.2, 0.3, 0.9, -0.1]);
        let r = chow_denning(&s, &[3], 0.05, VrScaling::Classical).unwrap();
        assert_eq!(r.v1, lomac_stat(&s, 3, VrScaling::Classical).unwrap().abs());
        assert_eq!(r.reject_rwh, r.v1 > r.threshold);
    }

    #[test]
    fn table_is_total() {
        assert_eq!(verdict_for(true, false), Hypothesis::H1);
        assert_eq!(verdict_for(false, false), Hypothesis::H0);
        assert_eq!(verdict_for(true, true), Hypothesis::H2);
        assert_eq!(verdict_for(false, true), Hypothesis::H3);
    }

    #[test]
    fn cvt_needs_eleven_blocks() {
        let c = BlockConfig::new(16, 10, 1.0).unwrap();
        let s = series(vec![0.1, -0.2, 0.3, 0.05, -0.1, 0.2, 0.0, -0.3, 0.15]);
        assert!(matches!(controlled_variations_test(&s, &c, 0.01), Err(Error::TooFewBlocks { .. })));
    }

    #[test]
    fn default_lags() {
        let s = DetectorSettings::default();
        assert_eq!(s.lag_set(), vec![2, 3, 4, 5, 6, 7, 8]);
        assert!(s.validate(16).is_ok());
        assert!(s.validate(15).is_err());
        assert!(s.validate(10).is_err());
    }
}
