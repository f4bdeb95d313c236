//! Simulation, carrier estimation and random-walk detection for tones whose
//! block-wise frequency may wander.
//!
//! A record of `K(N-1)+1` complex samples is split into `K` blocks of `N`
//! samples that share their endpoints. Each block's carrier is estimated by a
//! DFT peak search, and the first differences of those carriers are scored by
//! two tests:
//!
//! - the controlled-variations test, which asks whether the differences are
//!   far less variable than the peak frequencies of pure noise would be, and
//! - a Chow-Denning variance-ratio test, which asks whether they behave like
//!   the increments of a random walk.
//!
//! The two answers map onto one of four hypotheses ([`Hypothesis`]).
//!
//! ```
//! use tonewalk_core::prelude::*;
//!
//! let config = BlockConfig::new(64, 16, 1.0).unwrap();
//! let params = SignalParams::new(1.0, 1.0, 0.0).unwrap();
//! let scenario = Scenario::RandomWalk { jumps: JumpModel::RoundedNormal };
//! let mut rng = substream(7, Stream::Trial, 0);
//! let pivots = generate_pivots(&config, &scenario, &PivotOptions::default(), &mut rng).unwrap();
//! let record = synthesize_blocks(&pivots, &params, &config, &mut rng).unwrap();
//! let report = detect(&record, &config, &DetectorSettings::default()).unwrap();
//! assert!(report.decision().unwrap().cvt.stable);
//! ```

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detectors;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod signal;
pub mod spectral;
pub mod stats;

pub use config::{BlockConfig, SignalParams};
pub use detectors::{
    chow_denning, controlled_variations_test, detect, first_differences, joint_inference,
    lomac_stat, variance_ratio, CvtResult, DetectionReport, DetectorSettings, JointDecision,
    VrScaling, VrTestResult,
};
pub use error::{Error, Result};
pub use rng::{substream, Stream, TrialRng};
pub use signal::{
    generate_noise_blocks, generate_pivots, synthesize_blocks, BlockRecord, JumpModel,
    PivotOptions, PivotSequence, Scenario,
};
pub use spectral::{bin_frequency, dft, estimate_carriers, estimator_error_variance, CarrierEstimates, Spectrum};
pub use stats::{
    moments, normal_cdf, normal_quantile, sidak, sigma0_sq, sigma1_sq, wilson_hilferty,
    DiffSeries, MomentSummary, SidakExponent,
};

pub mod prelude {
    pub use crate::config::{BlockConfig, SignalParams};
    pub use crate::detectors::{detect, DetectorSettings, VrScaling};
    pub use crate::signal::Hypothesis;
    pub use crate::experiments::ExperimentConfig;
    pub use crate::rng::{substream, Stream};
    pub use crate::signal::{
        generate_noise_blocks, generate_pivots, synthesize_blocks, BlockRecord, JumpModel,
        PivotOptions, Scenario,
    };
    pub use crate::spectral::estimate_carriers;
    pub use crate::stats::SidakExponent;
}
