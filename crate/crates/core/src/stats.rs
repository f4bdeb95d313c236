//! Moment statistics, closed-form first-difference variances and the normal
//! distribution helpers shared by the detectors.

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::config::BlockConfig;
use crate::error::{Error, Result};
use crate::signal::JumpModel;

/// First differences of `source_len` carrier estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffSeries {
    values: Vec<f64>,
    source_len: usize,
}

impl DiffSeries {
    /// Wrap differences taken from `values.len() + 1` estimates.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("series", "need at least one difference"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("series", "non-finite difference"));
        }
        let source_len = values.len() + 1;
        Ok(Self { values, source_len })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of estimates the differences came from (`K`).
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    /// Unbiased sample variance (divisor `len - 1`).
    pub variance: f64,
    /// Pearson kurtosis `m4 / m2^2` from biased central moments.
    pub kurtosis: f64,
    /// `2(K-1) / (kurtosis - (K-4)/(K-2))`.
    pub dof: f64,
}

/// Mean, variance, kurtosis and the degrees-of-freedom estimate of a
/// difference series.
pub fn moments(series: &DiffSeries) -> Result<MomentSummary> {
    let n = series.len();
    if n < 4 {
        return Err(Error::param("series", format!("kurtosis needs at least 4 values, got {n}")));
    }
    let mean = series.mean();
    let (mut m2, mut m4) = (0.0, 0.0);
    for &v in series.values() {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    let variance = m2 / (n - 1) as f64;
    m2 /= n as f64;
    m4 /= n as f64;
    // Relative to the scale of the data so that float noise on a constant
    // series does not pass for spread.
    let scale = series.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m2 <= (scale * f64::EPSILON).powi(2) * 16.0 {
        return Err(Error::Degenerate("constant series has undefined kurtosis"));
    }
    let kurtosis = m4 / (m2 * m2);
    let k = series.source_len() as f64;
    let denom = kurtosis - (k - 4.0) / (k - 2.0);
    if !(denom > 0.0) {
        return Err(Error::InvalidDof { kurtosis });
    }
    Ok(MomentSummary { mean, variance, kurtosis, dof: 2.0 * (k - 1.0) / denom })
}

/// Variance of the first differences of noise-only peak frequencies,
/// `(1/6) [(1/T)^2 - (1/(NT))^2]`.
pub fn sigma0_sq(config: &BlockConfig) -> f64 {
    let fs = config.sample_rate();
    let l = config.bin_width();
    (fs * fs - l * l) / 6.0
}

/// Closed-form variance of the first differences under a stable random walk:
/// `(1/N) 12 / ((2 pi N T)^2 SNR) + c (1/(NT))^2` with `c = 9/24` for
/// uniform and `14/24` for rounded-normal jumps.
///
/// `c` is `E[u^2]/2 + 1/24`: two jumps per difference at a quarter weight,
/// plus two sub-bin displacements of variance `L^2/12` at a quarter weight.
pub fn sigma1_sq(config: &BlockConfig, snr: f64, jump_model: JumpModel) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::param("snr", format!("need SNR > 0, got {snr}")));
    }
    let n = config.n_per_block() as f64;
    let l = config.bin_width();
    let w = std::f64::consts::TAU * n * config.sample_period();
    let estimation = 12.0 / (n * w * w * snr);
    let jumps = jump_model.second_moment() / 2.0 + 1.0 / 24.0;
    Ok(estimation + jumps * l * l)
}

/// Wilson-Hilferty normalisation of a variance ratio (a `chi^2(dof)/dof`
/// variate): `(cbrt(r) - (1 - 2/(9 dof))) / sqrt(2/(9 dof))`.
pub fn wilson_hilferty(variance_ratio: f64, dof: f64) -> Result<f64> {
    if !(dof > 0.0) || !dof.is_finite() {
        return Err(Error::param("dof", format!("need dof > 0, got {dof}")));
    }
    if !(variance_ratio >= 0.0) {
        return Err(Error::param("variance_ratio", format!("need ratio >= 0, got {variance_ratio}")));
    }
    let c = 2.0 / (9.0 * dof);
    Ok((variance_ratio.cbrt() - (1.0 - c)) / c.sqrt())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile for `p` strictly inside `(0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", format!("quantile needs 0 < p < 1, got {p}")));
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // One Halley step; the residual is taken in the nearer tail.
    let e = if x < 0.0 { normal_cdf(x) - p } else { (1.0 - p) - normal_cdf(-x) };
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Which family size the Sidak correction divides by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SidakExponent {
    /// `J`: the Chow-Denning lags only.
    #[default]
    Tests,
    /// `J + 1`: the lags plus the controlled-variations test.
    TestsPlusOne,
}

impl SidakExponent {
    pub fn family_size(self, j: usize) -> usize {
        match self {
            SidakExponent::Tests => j,
            SidakExponent::TestsPlusOne => j + 1,
        }
    }

    pub fn alpha_star(self, alpha: f64, j: usize) -> Result<f64> {
        sidak(alpha, self.family_size(j))
    }
}

/// Per-test level `1 - (1 - alpha)^(1/j)` that holds a family of `j`
/// independent tests at `alpha`.
pub fn sidak(alpha: f64, j: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("need 0 < alpha < 1, got {alpha}")));
    }
    if j == 0 {
        return Err(Error::param("j", "need at least one test"));
    }
    Ok(-((-alpha).ln_1p() / j as f64).exp_m1())
}
