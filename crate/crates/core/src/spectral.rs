//! Normalised block DFT and coarse (peak-bin) carrier estimation.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::config::BlockConfig;
use crate::error::{Error, Result};
use crate::signal::BlockRecord;

/// `X[m] = (1/N) sum_n x[n] exp(-2 pi i n m / N)` and its power.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub coefficients: Vec<Complex64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    /// Index of the largest power; ties go to the smallest index.
    pub fn peak_bin(&self) -> usize {
        argmax_first(&self.power)
    }
}

fn argmax_first(power: &[f64]) -> usize {
    let mut best = 0;
    for (m, &p) in power.iter().enumerate().skip(1) {
        if p > power[best] {
            best = m;
        }
    }
    best
}

/// A planned `1/N`-normalised DFT of fixed length.
#[derive(Clone)]
pub struct Dft {
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Dft {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("block", format!("DFT needs at least 2 samples, got {n}")));
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self { fft, scale: 1.0 / n as f64 })
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Transform `block` into `buf` (resized as needed).
    pub fn transform_into(&self, block: &[Complex64], buf: &mut Vec<Complex64>) -> Result<()> {
        if block.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("block of {}", self.len()),
                actual: format!("block of {}", block.len()),
            });
        }
        buf.clear();
        buf.extend_from_slice(block);
        self.fft.process(buf);
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
        Ok(())
    }

    pub fn transform(&self, block: &[Complex64]) -> Result<Spectrum> {
        let mut coefficients = Vec::with_capacity(block.len());
        self.transform_into(block, &mut coefficients)?;
        let power = coefficients.iter().map(|z| z.norm_sqr()).collect();
        Ok(Spectrum { coefficients, power })
    }
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("len", &self.len()).finish()
    }
}

/// One-off normalised DFT of a block.
pub fn dft(block: &[Complex64]) -> Result<Spectrum> {
    if block.is_empty() {
        return Err(Error::param("block", "empty block"));
    }
    Dft::new(block.len())?.transform(block)
}

/// Effective frequency of DFT bin `m`: `m/(NT)` below `floor(N/2)`,
/// `(m-N)/(NT)` from there on.
pub fn bin_frequency(m: usize, config: &BlockConfig) -> Result<f64> {
    let n = config.n_per_block();
    if m >= n {
        return Err(Error::param("bin", format!("bin {m} outside 0..{n}")));
    }
    Ok(bin_frequency_unchecked(m, n, config.sample_period()))
}

pub(crate) fn bin_frequency_unchecked(m: usize, n: usize, t: f64) -> f64 {
    let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
    signed / (n as f64 * t)
}

/// Per-block peak bins and the carrier frequencies they stand for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierEstimates {
    pub peak_bins: Vec<usize>,
    pub carrier_freqs: Vec<f64>,
}

impl CarrierEstimates {
    pub fn len(&self) -> usize {
        self.peak_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peak_bins.is_empty()
    }
}

/// Coarse carrier estimate for every block: the DFT bin of largest power.
pub fn estimate_carriers(record: &BlockRecord, config: &BlockConfig) -> Result<CarrierEstimates> {
    record.matches(config)?;
    let n = config.n_per_block();
    let t = config.sample_period();
    let dft = Dft::new(n)?;
    let mut buf = Vec::with_capacity(n);
    let mut power = vec![0.0; n];
    let mut peak_bins = Vec::with_capacity(record.n_blocks());
    for block in record.blocks() {
        dft.transform_into(block, &mut buf)?;
        for (p, z) in power.iter_mut().zip(&buf) {
            *p = z.norm_sqr();
        }
        peak_bins.push(argmax_first(&power));
    }
    let carrier_freqs = peak_bins.iter().map(|&m| bin_frequency_unchecked(m, n, t)).collect();
    Ok(CarrierEstimates { peak_bins, carrier_freqs })
}

/// Variance of the peak location of a tone in noise,
/// `(1/N) 6 / ((2 pi N T)^2 SNR)`.
pub fn estimator_error_variance(config: &BlockConfig, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::param("snr", format!("need SNR > 0, got {snr}")));
    }
    let n = config.n_per_block() as f64;
    let w = std::f64::consts::TAU * n * config.sample_period();
    Ok(6.0 / (n * w * w * snr))
}
