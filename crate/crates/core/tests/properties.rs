//! Invariants over generated inputs.

use num_complex::Complex64;
use proptest::prelude::*;
use tonewalk_core::detectors::{chow_denning, controlled_variations_test, verdict_for};
use tonewalk_core::experiments::{analytical_roc, ExperimentConfig};
use tonewalk_core::prelude::*;
use tonewalk_core::signal::{headroom_band, simulate_record};
use tonewalk_core::stats::DiffSeries;
use tonewalk_core::*;

fn complex_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| Complex64::new(a, b)), len)
}

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len).prop_filter("non-constant", |v| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() > 1e-6
    })
}

fn scenario() -> impl Strategy<Value = Scenario> {
    prop_oneof![
        Just(Scenario::NoiseOnly),
        Just(Scenario::RandomWalk { jumps: JumpModel::UniformTernary }),
        Just(Scenario::RandomWalk { jumps: JumpModel::RoundedNormal }),
        Just(Scenario::DEFAULT_MEAN_REVERTING),
        Just(Scenario::DEFAULT_EXPLOSIVE),
        Just(Scenario::WideJumps),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_overlap_bit_exactly(
        n in 2usize..40, k in 2usize..20, t in 0.01f64..5.0, snr_db in -20.0f64..20.0,
        s in scenario(), seed in any::<u64>(),
    ) {
        let config = BlockConfig::new(n, k, t).unwrap();
        let params = SignalParams::from_snr_db(snr_db).unwrap();
        let mut rng = substream(seed, Stream::User, 0);
        match simulate_record(&config, &params, &s, &PivotOptions::default(), &mut rng, 10_000) {
            Ok((rec, _)) => {
                prop_assert_eq!(rec.samples().len(), k * (n - 1) + 1);
                prop_assert_eq!(rec.n_blocks(), k);
                for j in 0..k - 1 {
                    prop_assert_eq!(rec.block(j)[n - 1], rec.block(j + 1)[0]);
                }
                if let Some(p) = rec.provenance() {
                    prop_assert_eq!(p.len(), k + 1);
                    let fs = config.sample_rate();
                    for &f in &p.pivot_freqs {
                        prop_assert!(f >= -0.5 * fs && f < 0.5 * fs, "pivot {} outside band", f);
                    }
                }
            }
            Err(Error::InsufficientHeadroom { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn random_walks_stay_in_band_and_follow_jumps(
        n in 8usize..128, k in 2usize..40, seed in any::<u64>(), uniform in any::<bool>(),
    ) {
        let config = BlockConfig::new(n, k, 1.0).unwrap();
        let model = if uniform { JumpModel::UniformTernary } else { JumpModel::RoundedNormal };
        let s = Scenario::RandomWalk { jumps: model };
        let mut rng = substream(seed, Stream::User, 1);
        if let Ok(p) = generate_pivots(&config, &s, &PivotOptions::default(), &mut rng) {
            let (lo, hi) = headroom_band(n);
            for j in 0..k {
                prop_assert_eq!(p.pivot_bins[j + 1] - p.pivot_bins[j], p.jumps[j]);
            }
            prop_assert!(p.pivot_bins.iter().all(|&m| (lo..=hi).contains(&m)));
            prop_assert!(p.jumps.iter().all(|&u| u.abs() < n as i64 / 2));
        }
    }

    #[test]
    fn dft_is_linear_and_parseval(x in complex_vec(2..48), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let y: Vec<Complex64> = x.iter().rev().cloned().collect();
        let mix: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| p * a + q * b).collect();
        let (sx, sy, sm) = (dft(&x).unwrap(), dft(&y).unwrap(), dft(&mix).unwrap());
        let scale = 1.0 + sm.coefficients.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for m in 0..x.len() {
            let want = sx.coefficients[m] * a + sy.coefficients[m] * b;
            prop_assert!((sm.coefficients[m] - want).norm() < 1e-9 * scale);
        }
        let time = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
        let freq: f64 = sx.power.iter().sum();
        prop_assert!((time - freq).abs() <= 1e-9 * time.max(1e-300));
    }

    #[test]
    fn peak_bin_ignores_complex_gain(x in complex_vec(4..64), mag in 0.01f64..100.0, arg in -3.2f64..3.2) {
        let g = Complex64::from_polar(mag, arg);
        let s = dft(&x).unwrap();
        // Skip near-ties, where rounding may legitimately swap the winner.
        let mut p = s.power.clone();
        p.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(p[0] - p[1] > 1e-9 * p[0]);
        let scaled: Vec<Complex64> = x.iter().map(|z| z * g).collect();
        prop_assert_eq!(dft(&scaled).unwrap().peak_bin(), s.peak_bin());
    }

    #[test]
    fn carrier_freqs_are_mapped_peak_bins(n in 2usize..40, k in 2usize..8, seed in any::<u64>()) {
        let config = BlockConfig::new(n, k, 0.5).unwrap();
        let rec = generate_noise_blocks(&config, 1.0, &mut substream(seed, Stream::User, 2)).unwrap();
        let est = estimate_carriers(&rec, &config).unwrap();
        let fs = config.sample_rate();
        for (&m, &f) in est.peak_bins.iter().zip(&est.carrier_freqs) {
            prop_assert!(m < n);
            prop_assert_eq!(f, bin_frequency(m, &config).unwrap());
            // The printed map sends bin floor(N/2) of an odd N half a bin
            // below -fs/2.
            let low = if n % 2 == 0 { -0.5 * fs } else { -0.5 * fs - 0.5 * config.bin_width() - 1e-12 };
            prop_assert!(f >= low && f < 0.5 * fs);
        }
    }

    #[test]
    fn vr_invariant_to_shift_and_scale(y in series(11..60), shift in -100.0f64..100.0, scale in 0.001f64..1000.0, classical in any::<bool>()) {
        let scaling = if classical { VrScaling::Classical } else { VrScaling::AsPrinted };
        let base = DiffSeries::new(y.clone()).unwrap();
        let moved = DiffSeries::new(y.iter().map(|v| scale * v + shift).collect()).unwrap();
        for tau in 2..=base.source_len() / 2 {
            let a = variance_ratio(&base, tau, scaling).unwrap();
            let b = variance_ratio(&moved, tau, scaling).unwrap();
            prop_assert!((a - b).abs() < 1e-8 * a.max(1.0), "tau={}: {} vs {}", tau, a, b);
        }
    }

    #[test]
    fn v1_grows_with_the_lag_set(y in series(15..60), extra in 0usize..6) {
        let s = DiffSeries::new(y).unwrap();
        let max = s.source_len() / 2;
        let small: Vec<usize> = (2..=2 + extra.min(max - 2)).collect();
        let large: Vec<usize> = (2..=max).collect();
        let a = chow_denning(&s, &small, 0.01, VrScaling::AsPrinted).unwrap();
        let b = chow_denning(&s, &large, 0.01, VrScaling::AsPrinted).unwrap();
        prop_assert!(b.v1 >= a.v1);
        let mmax = b.m1.iter().fold(0.0f64, |acc, m| acc.max(m.abs()));
        prop_assert_eq!(b.v1, mmax);
        prop_assert_eq!(b.reject_rwh, b.v1 > b.threshold);
    }

    #[test]
    fn cvt_decision_is_its_threshold(y in series(10..40), a_star in 0.0001f64..0.5) {
        let s = DiffSeries::new(y).unwrap();
        let c = BlockConfig::new(64, s.source_len(), 1.0).unwrap();
        if let Ok(r) = controlled_variations_test(&s, &c, a_star) {
            prop_assert_eq!(r.stable, r.z0 < r.threshold);
            prop_assert!(r.variance >= 0.0);
        }
    }

    #[test]
    fn detection_is_deterministic(seed in any::<u64>(), s in scenario(), alpha in 0.01f64..0.5) {
        let config = BlockConfig::new(32, 16, 1.0).unwrap();
        let params = SignalParams::from_snr_db(0.0).unwrap();
        let settings = DetectorSettings::default().with_alpha(alpha);
        let run = || {
            let mut rng = substream(seed, Stream::User, 3);
            let (rec, _) = simulate_record(&config, &params, &s, &PivotOptions::default(), &mut rng, 10_000).ok()?;
            Some(detect(&rec, &config, &settings).unwrap())
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(&a, &b);
        if let Some(d) = a.as_ref().and_then(|r| r.decision()) {
            prop_assert_eq!(d.verdict, verdict_for(d.cvt.stable, d.vrt.reject_rwh));
            prop_assert_eq!(d.cvt.alpha_star, d.vrt.alpha_star);
        }
    }

    #[test]
    fn sidak_monotone(a in 0.001f64..0.9, da in 0.001f64..0.09, j in 1usize..30) {
        let base = sidak(a, j).unwrap();
        prop_assert!(sidak(a + da, j).unwrap() > base);
        prop_assert!(sidak(a, j + 1).unwrap() < base);
        prop_assert!(base <= a);
    }

    #[test]
    fn quantile_round_trips(p in 1e-8f64..(1.0 - 1e-8)) {
        let x = normal_quantile(p).unwrap();
        prop_assert!((normal_cdf(x) - p).abs() < 1e-10);
    }

    #[test]
    fn analytical_roc_monotone(n_exp in 4u32..8, k in 11usize..40, t in 0.05f64..2.0, snr_db in -20.0f64..10.0) {
        let n = 1usize << n_exp;
        let config = BlockConfig::new(n, k, t).unwrap();
        let params = SignalParams::from_snr_db(snr_db).unwrap();
        let mut cfg = ExperimentConfig::new(config, params, 1, 0);
        cfg.j_lags = (k / 2 - 1).min(7);
        cfg.alphas = (1..40).map(|i| i as f64 / 40.0).collect();
        let curve = analytical_roc(&cfg).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].pd >= w[0].pd);
        }
        // More SNR or more samples per block never lowers the curve.
        let mut louder = cfg.clone();
        louder.params = SignalParams::from_snr_db(snr_db + 3.0).unwrap();
        let mut longer = cfg.clone();
        longer.config = config.with_n_per_block(2 * n).unwrap();
        for other in [analytical_roc(&louder).unwrap(), analytical_roc(&longer).unwrap()] {
            for (a, b) in curve.iter().zip(&other) {
                prop_assert!(b.pd >= a.pd - 1e-12);
            }
        }
    }

    #[test]
    fn sigma0_dominates_sigma1(n_exp in 4u32..10, t in 0.01f64..10.0, snr_db in -19.9f64..40.0, uniform in any::<bool>()) {
        let config = BlockConfig::new(1 << n_exp, 16, t).unwrap();
        let model = if uniform { JumpModel::UniformTernary } else { JumpModel::RoundedNormal };
        let snr = 10f64.powf(snr_db / 10.0);
        prop_assert!(sigma0_sq(&config) > sigma1_sq(&config, snr, model).unwrap());
    }
}

#[test]
fn verdict_table_is_total_and_injective() {
    let mut seen = std::collections::BTreeSet::new();
    for stable in [false, true] {
        for reject in [false, true] {
            seen.insert(verdict_for(stable, reject));
        }
    }
    assert_eq!(seen.len(), 4);
}
