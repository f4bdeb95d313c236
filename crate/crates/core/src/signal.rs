//! Ground-truth pivot processes and block-sampled observations.
//!
//! Pivot bins are stored as *signed* effective bin indices, so bin `m` sits at
//! `m * L` Hz with `L = 1/(NT)`. [`PivotSequence::dft_bin`] maps them back to
//! DFT indices in `0..N`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{BlockConfig, SignalParams};
use crate::error::{Error, Result};

/// The four hypotheses a record can be generated under or classified as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Noise only.
    H0,
    /// Stable random walk.
    H1,
    /// Stable, not random-walk-like (e.g. mean reverting).
    H2,
    /// Unstable, not random-walk-like.
    H3,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 4] = [Hypothesis::H0, Hypothesis::H1, Hypothesis::H2, Hypothesis::H3];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Distribution of the integer bin jumps of a random walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpModel {
    /// `-1`, `0` or `+1`, each with probability 1/3.
    UniformTernary,
    /// Nearest integer to a standard normal draw.
    RoundedNormal,
}

impl JumpModel {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            JumpModel::UniformTernary => rng.random_range(-1i64..=1),
            JumpModel::RoundedNormal => {
                let z: f64 = rng.sample(StandardNormal);
                z.round() as i64
            }
        }
    }

    /// `E[u^2]` as used by the closed-form H1 variance: 2/3 and 13/12.
    pub fn second_moment(&self) -> f64 {
        match self {
            JumpModel::UniformTernary => 2.0 / 3.0,
            JumpModel::RoundedNormal => 13.0 / 12.0,
        }
    }
}

/// How the pivot frequencies evolve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    /// H0: no tone at all.
    NoiseOnly,
    /// H1: `m[k] = m[k-1] + u[k]`, never leaving the band.
    RandomWalk { jumps: JumpModel },
    /// H2: integer-rounded AR(1) on the bin offset with `|rho| < 1`.
    MeanReverting { rho: f64, scale: f64 },
    /// H3: integer-rounded AR(1) with `|rho| > 1`, wrapped modulo `N`.
    Explosive { rho: f64, scale: f64 },
    /// H3: jumps uniform over all `N` bins, wrapped modulo `N`.
    WideJumps,
}

impl Scenario {
    pub const DEFAULT_MEAN_REVERTING: Scenario = Scenario::MeanReverting { rho: 0.9, scale: 1.0 };
    pub const DEFAULT_EXPLOSIVE: Scenario = Scenario::Explosive { rho: 1.05, scale: 1.0 };

    pub fn hypothesis(&self) -> Hypothesis {
        match self {
            Scenario::NoiseOnly => Hypothesis::H0,
            Scenario::RandomWalk { .. } => Hypothesis::H1,
            Scenario::MeanReverting { .. } => Hypothesis::H2,
            Scenario::Explosive { .. } | Scenario::WideJumps => Hypothesis::H3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_scale = |scale: f64| {
            if scale.is_finite() && scale > 0.0 {
                Ok(())
            } else {
                Err(Error::param("scale", format!("innovation scale must be > 0, got {scale}")))
            }
        };
        match *self {
            Scenario::MeanReverting { rho, scale } => {
                if !(rho.is_finite() && rho.abs() < 1.0) {
                    return Err(Error::param("rho", format!("mean-reverting needs |rho| < 1, got {rho}")));
                }
                check_scale(scale)
            }
            Scenario::Explosive { rho, scale } => {
                if !(rho.is_finite() && rho.abs() > 1.0) {
                    return Err(Error::param("rho", format!("explosive needs |rho| > 1, got {rho}")));
                }
                check_scale(scale)
            }
            _ => Ok(()),
        }
    }

    /// Whether pivots wrap modulo `N` instead of failing at the band edge.
    pub fn wraps(&self) -> bool {
        matches!(self, Scenario::Explosive { .. } | Scenario::WideJumps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotOptions {
    /// Signed effective bin the walk starts from. Bin 0 is 0 Hz.
    pub start_bin: i64,
    /// Add the uniform sub-bin displacement to every pivot frequency.
    pub include_displacement: bool,
}

impl Default for PivotOptions {
    fn default() -> Self {
        Self { start_bin: 0, include_displacement: true }
    }
}

/// Hidden pivot bins and frequencies at the `K+1` block boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotSequence {
    n_per_block: usize,
    /// Signed effective bins, `K+1` entries.
    pub pivot_bins: Vec<i64>,
    /// Pivot frequencies in Hz, `K+1` entries.
    pub pivot_freqs: Vec<f64>,
    /// `K` jumps; for non-wrapping scenarios `jumps[k] = pivot_bins[k+1] - pivot_bins[k]`.
    pub jumps: Vec<i64>,
}

impl PivotSequence {
    pub fn new(n_per_block: usize, pivot_bins: Vec<i64>, pivot_freqs: Vec<f64>, jumps: Vec<i64>) -> Result<Self> {
        if pivot_bins.len() != pivot_freqs.len() || jumps.len() + 1 != pivot_bins.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("K+1 bins and freqs, K jumps (bins = {})", pivot_bins.len()),
                actual: format!("{} freqs, {} jumps", pivot_freqs.len(), jumps.len()),
            });
        }
        Ok(Self { n_per_block, pivot_bins, pivot_freqs, jumps })
    }

    pub fn n_per_block(&self) -> usize {
        self.n_per_block
    }

    /// Number of pivots, `K+1`.
    pub fn len(&self) -> usize {
        self.pivot_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot_bins.is_empty()
    }

    /// DFT index (`0..N`) of pivot `k`.
    pub fn dft_bin(&self, k: usize) -> usize {
        self.pivot_bins[k].rem_euclid(self.n_per_block as i64) as usize
    }

    /// True carrier of block `k`: the midpoint of its two pivots.
    pub fn carrier_freq(&self, k: usize) -> f64 {
        0.5 * (self.pivot_freqs[k] + self.pivot_freqs[k + 1])
    }
}

/// Signed bins whose displaced pivot frequency always stays inside
/// `[-fs/2, fs/2)`.
pub fn headroom_band(n_per_block: usize) -> (i64, i64) {
    let n = n_per_block as f64;
    let low = ((1.0 - n) / 2.0).ceil() as i64;
    let high = ((n - 1.0) / 2.0).ceil() as i64 - 1;
    (low, high)
}

/// Signed effective bin of an arbitrary integer bin, following the DFT
/// index-to-frequency map.
pub fn wrap_bin(m: i64, n_per_block: usize) -> i64 {
    let n = n_per_block as i64;
    let b = m.rem_euclid(n);
    if b < n / 2 {
        b
    } else {
        b - n
    }
}

fn wrap_freq(f: f64, fs: f64) -> f64 {
    (f + 0.5 * fs).rem_euclid(fs) - 0.5 * fs
}

/// Draw the pivot process for `scenario`.
///
/// Non-wrapping scenarios fail with [`Error::InsufficientHeadroom`] as soon as
/// the realised walk leaves [`headroom_band`].
pub fn generate_pivots<R: Rng + ?Sized>(
    config: &BlockConfig,
    scenario: &Scenario,
    options: &PivotOptions,
    rng: &mut R,
) -> Result<PivotSequence> {
    scenario.validate()?;
    let n = config.n_per_block();
    let k_blocks = config.n_blocks();
    let (low, high) = headroom_band(n);
    let start = options.start_bin;
    if !scenario.wraps() && !(low..=high).contains(&start) {
        return Err(Error::InsufficientHeadroom { step: 0, bin: start, low, high });
    }

    let mut bins = Vec::with_capacity(k_blocks + 1);
    let mut jumps = Vec::with_capacity(k_blocks);
    match *scenario {
        Scenario::NoiseOnly => {
            return Err(Error::param("scenario", "noise-only records have no pivot process"));
        }
        Scenario::RandomWalk { jumps: model } => {
            let mut m = start;
            bins.push(m);
            for step in 1..=k_blocks {
                let u = model.draw(rng);
                m += u;
                if !(low..=high).contains(&m) {
                    return Err(Error::InsufficientHeadroom { step, bin: m, low, high });
                }
                jumps.push(u);
                bins.push(m);
            }
        }
        Scenario::MeanReverting { rho, scale } | Scenario::Explosive { rho, scale } => {
            let wraps = scenario.wraps();
            let mut offset = 0.0f64;
            let mut prev = start;
            bins.push(if wraps { wrap_bin(start, n) } else { start });
            for step in 1..=k_blocks {
                let z: f64 = rng.sample(StandardNormal);
                offset = rho * offset + scale * z;
                let m = start + offset.round() as i64;
                jumps.push(m - prev);
                prev = m;
                if wraps {
                    bins.push(wrap_bin(m, n));
                } else if (low..=high).contains(&m) {
                    bins.push(m);
                } else {
                    return Err(Error::InsufficientHeadroom { step, bin: m, low, high });
                }
            }
        }
        Scenario::WideJumps => {
            let mut m = wrap_bin(start, n);
            bins.push(m);
            for _ in 0..k_blocks {
                let u = rng.random_range(0..n as i64);
                m = wrap_bin(m + u, n);
                jumps.push(u);
                bins.push(m);
            }
        }
    }

    let width = config.bin_width();
    let fs = config.sample_rate();
    let freqs = bins
        .iter()
        .map(|&m| {
            let delta = if options.include_displacement {
                rng.random_range(-0.5 * width..0.5 * width)
            } else {
                0.0
            };
            let f = m as f64 * width + delta;
            if scenario.wraps() {
                wrap_freq(f, fs)
            } else {
                f
            }
        })
        .collect();
    PivotSequence::new(n, bins, freqs, jumps)
}

/// [`generate_pivots`] with rejection sampling on headroom failures.
///
/// Returns the accepted sequence and the number of rejected draws. Gives up
/// with the last headroom error after `max_attempts` draws.
pub fn generate_pivots_conditioned<R: Rng + ?Sized>(
    config: &BlockConfig,
    scenario: &Scenario,
    options: &PivotOptions,
    rng: &mut R,
    max_attempts: usize,
) -> Result<(PivotSequence, usize)> {
    let mut last = None;
    for rejected in 0..max_attempts.max(1) {
        match generate_pivots(config, scenario, options, rng) {
            Ok(p) => return Ok((p, rejected)),
            Err(e @ Error::InsufficientHeadroom { step, .. }) if step > 0 => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Blocks of `N` samples that overlap by one sample.
///
/// The record is stored flat (`K(N-1)+1` samples) and blocks are slices into
/// it, so `block(k)[N-1]` and `block(k+1)[0]` are the same sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    n_per_block: usize,
    n_blocks: usize,
    samples: Vec<Complex64>,
    provenance: Option<PivotSequence>,
}

impl BlockRecord {
    /// Partition a flat record. Fails unless `samples.len() == K(N-1)+1`.
    pub fn from_samples(config: &BlockConfig, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != config.record_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} samples (K(N-1)+1)", config.record_len()),
                actual: format!("{} samples", samples.len()),
            });
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::param("samples", "non-finite sample"));
        }
        Ok(Self { n_per_block: config.n_per_block(), n_blocks: config.n_blocks(), samples, provenance: None })
    }

    pub fn with_provenance(mut self, pivots: PivotSequence) -> Self {
        self.provenance = Some(pivots);
        self
    }

    pub fn n_per_block(&self) -> usize {
        self.n_per_block
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn provenance(&self) -> Option<&PivotSequence> {
        self.provenance.as_ref()
    }

    pub fn block(&self, k: usize) -> &[Complex64] {
        let start = k * (self.n_per_block - 1);
        &self.samples[start..start + self.n_per_block]
    }

    pub fn blocks(&self) -> impl ExactSizeIterator<Item = &[Complex64]> + '_ {
        (0..self.n_blocks).map(move |k| self.block(k))
    }

    pub fn matches(&self, config: &BlockConfig) -> Result<()> {
        if self.n_per_block != config.n_per_block() || self.n_blocks != config.n_blocks() {
            return Err(Error::ShapeMismatch {
                expected: format!("N={}, K={}", config.n_per_block(), config.n_blocks()),
                actual: format!("N={}, K={}", self.n_per_block, self.n_blocks),
            });
        }
        Ok(())
    }
}

fn complex_noise<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// Tone plus complex white Gaussian noise.
///
/// Within block `k` the instantaneous frequency ramps linearly from pivot `k`
/// to pivot `k+1`. Phase is the exact integral of that ramp, so sample `n` of
/// block `k` has phase
/// `phi_k + 2 pi T (n f_k + n^2 (f_{k+1} - f_k) / (2(N-1)))`
/// and `phi_{k+1}` is the same expression at `n = N-1`.
pub fn synthesize_blocks<R: Rng + ?Sized>(
    pivots: &PivotSequence,
    params: &SignalParams,
    config: &BlockConfig,
    rng: &mut R,
) -> Result<BlockRecord> {
    let n = config.n_per_block();
    let k_blocks = config.n_blocks();
    if pivots.len() != k_blocks + 1 || pivots.n_per_block() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{} pivots for N={n}", k_blocks + 1),
            actual: format!("{} pivots for N={}", pivots.len(), pivots.n_per_block()),
        });
    }
    if pivots.pivot_freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::param("pivot_freqs", "non-finite pivot frequency"));
    }

    let t = config.sample_period();
    let span = (n - 1) as f64;
    let amp = params.amplitude();
    let mut samples = Vec::with_capacity(config.record_len());
    let mut phase = params.initial_phase().rem_euclid(TAU);
    for k in 0..k_blocks {
        let f0 = pivots.pivot_freqs[k];
        let slope = (pivots.pivot_freqs[k + 1] - f0) / span;
        for i in 0..n - 1 {
            let x = i as f64;
            let p = phase + TAU * t * (x * f0 + 0.5 * x * x * slope);
            samples.push(Complex64::from_polar(amp, p));
        }
        phase = (phase + TAU * t * span * 0.5 * (f0 + pivots.pivot_freqs[k + 1])).rem_euclid(TAU);
    }
    samples.push(Complex64::from_polar(amp, phase));

    let sd = (0.5 * params.noise_variance()).sqrt();
    for z in samples.iter_mut() {
        *z += complex_noise(rng, sd);
    }
    Ok(BlockRecord::from_samples(config, samples)?.with_provenance(pivots.clone()))
}

/// Noise-only record: complex WGN of total variance `noise_variance`.
pub fn generate_noise_blocks<R: Rng + ?Sized>(
    config: &BlockConfig,
    noise_variance: f64,
    rng: &mut R,
) -> Result<BlockRecord> {
    if !(noise_variance.is_finite() && noise_variance > 0.0) {
        return Err(Error::param("noise_variance", format!("need variance > 0, got {noise_variance}")));
    }
    let sd = (0.5 * noise_variance).sqrt();
    let samples = (0..config.record_len()).map(|_| complex_noise(rng, sd)).collect();
    BlockRecord::from_samples(config, samples)
}

/// Draw a record under any scenario, conditioning non-wrapping walks on
/// staying inside the band. Returns the record and the number of rejected
/// pivot draws.
pub fn simulate_record<R: Rng + ?Sized>(
    config: &BlockConfig,
    params: &SignalParams,
    scenario: &Scenario,
    options: &PivotOptions,
    rng: &mut R,
    max_attempts: usize,
) -> Result<(BlockRecord, usize)> {
    match scenario {
        Scenario::NoiseOnly => Ok((generate_noise_blocks(config, params.noise_variance(), rng)?, 0)),
        _ => {
            let (pivots, rejected) = generate_pivots_conditioned(config, scenario, options, rng, max_attempts)?;
            Ok((synthesize_blocks(&pivots, params, config, rng)?, rejected))
        }
    }
}
