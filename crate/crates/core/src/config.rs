use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretisation of a record into `n_blocks` overlapping blocks of
/// `n_per_block` samples taken every `sample_period` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    n_per_block: usize,
    n_blocks: usize,
    sample_period: f64,
}

impl BlockConfig {
    pub fn new(n_per_block: usize, n_blocks: usize, sample_period: f64) -> Result<Self> {
        if n_per_block < 2 {
            return Err(Error::param("n_per_block", format!("need N >= 2, got {n_per_block}")));
        }
        if n_blocks < 2 {
            return Err(Error::param("n_blocks", format!("need K >= 2, got {n_blocks}")));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::param("sample_period", format!("need T > 0, got {sample_period}")));
        }
        Ok(Self { n_per_block, n_blocks, sample_period })
    }

    /// Blockwise sample size `N`.
    pub fn n_per_block(&self) -> usize {
        self.n_per_block
    }

    /// Block count `K`.
    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Sampling period `T` in seconds.
    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_period
    }

    /// Width of one Fourier bin, `1/(NT)`.
    pub fn bin_width(&self) -> f64 {
        1.0 / (self.n_per_block as f64 * self.sample_period)
    }

    /// Distinct samples in a record: `K(N-1)+1`.
    pub fn record_len(&self) -> usize {
        self.n_blocks * (self.n_per_block - 1) + 1
    }

    pub fn with_n_per_block(&self, n: usize) -> Result<Self> {
        Self::new(n, self.n_blocks, self.sample_period)
    }

    pub fn with_n_blocks(&self, k: usize) -> Result<Self> {
        Self::new(self.n_per_block, k, self.sample_period)
    }

    pub fn with_sample_period(&self, t: f64) -> Result<Self> {
        Self::new(self.n_per_block, self.n_blocks, t)
    }
}

/// Tone amplitude, total complex noise variance and starting phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalParams {
    amplitude: f64,
    noise_variance: f64,
    initial_phase: f64,
}

impl SignalParams {
    pub fn new(amplitude: f64, noise_variance: f64, initial_phase: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::param("amplitude", format!("need A > 0, got {amplitude}")));
        }
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::param("noise_variance", format!("need variance > 0, got {noise_variance}")));
        }
        if !initial_phase.is_finite() {
            return Err(Error::param("initial_phase", "must be finite"));
        }
        Ok(Self { amplitude, noise_variance, initial_phase })
    }

    /// Unit amplitude with the noise variance chosen to hit `snr_db`.
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::param("snr_db", "must be finite"));
        }
        Self::new(1.0, 10f64.powf(-snr_db / 10.0), 0.0)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn initial_phase(&self) -> f64 {
        self.initial_phase
    }

    /// `A^2 / sigma_w^2`.
    pub fn snr(&self) -> f64 {
        self.amplitude * self.amplitude / self.noise_variance
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr().log10()
    }
}
