//! Command implementations. Each returns the bytes of the files it produces;
//! the caller writes them and the manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use tonewalk_core::detectors::{DetectionReport, Outcome};
use tonewalk_core::experiments::{
    analytical_roc, dof_convergence_study, empirical_roc, estimation_error_study, DofRow, EstimationErrorRow,
};
use tonewalk_core::prelude::*;
use tonewalk_core::signal::simulate_record;

use crate::config::{RunConfig, SweepKind};
use crate::error::{exit, CliError, Result};
use crate::manifest::{sidecar, Invocation, FileDigest, StudyKind};
use crate::samples;

/// Files to write plus what goes into the manifest.
#[derive(Debug)]
pub struct Produced {
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub inputs: Vec<FileDigest>,
    pub summary: serde_json::Value,
    pub exit_code: u8,
}

pub fn run(command: &Invocation, cfg: &RunConfig, out: Option<&Path>) -> Result<Produced> {
    let need_out = || out.ok_or_else(|| CliError::Usage("--out is required".into()));
    match command {
        Invocation::Simulate => simulate(cfg, need_out()?),
        Invocation::Detect { input, layout_from_config } => detect(cfg, input, *layout_from_config, out),
        Invocation::Roc => roc(cfg, need_out()?),
        Invocation::Study { kind } => study(cfg, *kind, need_out()?),
    }
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Produced> {
    let config = cfg.block_config()?;
    let params = cfg.signal_params()?;
    let scenario = cfg.scenario();
    let mut rng = substream(cfg.seed, Stream::Simulate, 0);
    let (record, rejected) =
        simulate_record(&config, &params, &scenario, &cfg.pivot_options(), &mut rng, cfg.max_attempts)?;
    let mut files = vec![(out.to_path_buf(), samples::encode(&record, &config))];
    if let Some(p) = record.provenance() {
        files.push((sidecar(out, "pivots.csv"), samples::pivots_csv(p)));
    }
    Ok(Produced {
        files,
        inputs: vec![],
        summary: json!({
            "samples": record.samples().len(),
            "hypothesis": scenario.hypothesis(),
            "rejected_pivot_draws": rejected,
        }),
        exit_code: exit::OK,
    })
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    verdict: String,
    n_per_block: usize,
    n_blocks: usize,
    sample_period: f64,
    #[serde(flatten)]
    report: &'a DetectionReport,
}

pub fn detect(cfg: &RunConfig, input: &Path, layout_from_config: bool, out: Option<&Path>) -> Result<Produced> {
    let is_csv = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (record, config) = if is_csv {
        let config = cfg.block_config()?;
        (samples::read_csv(input, &config)?, config)
    } else {
        let layout = if layout_from_config { Some(cfg.block_config()?) } else { None };
        samples::read(input, layout.as_ref())?
    };
    let report = tonewalk_core::detect(&record, &config, &cfg.detector_settings())?;
    let (verdict, exit_code) = match &report.outcome {
        Outcome::Decided(d) => (d.verdict.to_string(), exit::OK),
        Outcome::Degenerate { .. } => ("DEGENERATE".to_string(), exit::DEGENERATE),
    };
    let body = DetectOutput {
        verdict: verdict.clone(),
        n_per_block: config.n_per_block(),
        n_blocks: config.n_blocks(),
        sample_period: config.sample_period(),
        report: &report,
    };
    let mut bytes = serde_json::to_vec_pretty(&body).expect("report serialises");
    bytes.push(b'\n');
    let target = out.map_or_else(|| PathBuf::from("-"), Path::to_path_buf);
    Ok(Produced {
        files: vec![(target, bytes)],
        inputs: vec![FileDigest::of_file(input)?],
        summary: json!({ "verdict": verdict, "alpha_star": report.alpha_star }),
        exit_code,
    })
}

#[derive(Serialize)]
struct RocRow {
    alpha: f64,
    alpha_star: f64,
    pd_analytical: f64,
    pd_empirical: Option<f64>,
    pd_stderr: Option<f64>,
    pfa_empirical: Option<f64>,
    converged_flag: Option<bool>,
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serialises");
    }
    w.into_inner().expect("in-memory writer")
}

pub fn roc(cfg: &RunConfig, out: &Path) -> Result<Produced> {
    let exp = cfg.experiment()?;
    let (rows, summary) = if cfg.analytical_only {
        let rows: Vec<RocRow> = analytical_roc(&exp)?
            .into_iter()
            .map(|a| RocRow {
                alpha: a.alpha,
                alpha_star: a.alpha_star,
                pd_analytical: a.pd,
                pd_empirical: None,
                pd_stderr: None,
                pfa_empirical: None,
                converged_flag: None,
            })
            .collect();
        (rows, json!({ "analytical_only": true }))
    } else {
        let r = empirical_roc(&exp)?;
        let rows = r
            .points
            .iter()
            .zip(&r.analytical)
            .zip(&r.within_band)
            .map(|((e, a), &ok)| RocRow {
                alpha: a.alpha,
                alpha_star: a.alpha_star,
                pd_analytical: a.pd,
                pd_empirical: Some(e.pd),
                pd_stderr: e.pd_stderr,
                pfa_empirical: e.pfa_empirical,
                converged_flag: Some(ok),
            })
            .collect();
        (rows, json!({ "converged": r.converged, "signal": r.signal, "noise": r.noise }))
    };
    Ok(Produced { files: vec![(out.to_path_buf(), csv_bytes(&rows))], inputs: vec![], summary, exit_code: exit::OK })
}

#[derive(Serialize)]
struct DofCsv {
    n_per_block: usize,
    jump_model: &'static str,
    mean_dof: f64,
    stderr: f64,
    median_dof: f64,
    target: f64,
    relative_gap: f64,
    trials: usize,
    failed: usize,
    rejected_pivot_draws: usize,
}

impl From<&DofRow> for DofCsv {
    fn from(r: &DofRow) -> Self {
        Self {
            n_per_block: r.n_per_block,
            jump_model: match r.jump_model {
                JumpModel::UniformTernary => "uniform",
                JumpModel::RoundedNormal => "normal",
            },
            mean_dof: r.mean_dof,
            stderr: r.stderr,
            median_dof: r.median_dof,
            target: r.target,
            relative_gap: r.relative_gap(),
            trials: r.trials,
            failed: r.batch.failed + r.batch.degenerate,
            rejected_pivot_draws: r.batch.rejected_pivots,
        }
    }
}

#[derive(Serialize)]
struct EstErrCsv {
    swept: &'static str,
    value: f64,
    rms_bins: f64,
    percent_of_n: f64,
    blocks_scored: usize,
    failed: usize,
}

impl EstErrCsv {
    fn new(r: &EstimationErrorRow, sweep: SweepKind) -> Self {
        Self {
            swept: match sweep {
                SweepKind::Blocks => "n_blocks",
                SweepKind::SamplePeriod => "sample_period",
            },
            value: r.value,
            rms_bins: r.rms_bins,
            percent_of_n: r.percent_of_n,
            blocks_scored: r.blocks_scored,
            failed: r.batch.failed,
        }
    }
}

pub fn study(cfg: &RunConfig, kind: StudyKind, out: &Path) -> Result<Produced> {
    let exp = cfg.experiment()?;
    let (bytes, summary) = match kind {
        StudyKind::Dof => {
            let models: Vec<JumpModel> = cfg.jump_models.iter().map(|&j| j.into()).collect();
            let rows = dof_convergence_study(&exp, &cfg.n_grid, &models)?;
            let csv: Vec<DofCsv> = rows.iter().map(DofCsv::from).collect();
            (csv_bytes(&csv), json!({ "rows": rows.len() }))
        }
        StudyKind::Esterr => {
            let rows = estimation_error_study(&exp, &cfg.sweep())?;
            let lo = rows.iter().map(|r| r.percent_of_n).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r.percent_of_n).fold(0.0, f64::max);
            let csv: Vec<EstErrCsv> = rows.iter().map(|r| EstErrCsv::new(r, cfg.sweep)).collect();
            (csv_bytes(&csv), json!({ "rows": rows.len(), "max_over_min": hi / lo }))
        }
    };
    Ok(Produced { files: vec![(out.to_path_buf(), bytes)], inputs: vec![], summary, exit_code: exit::OK })
}
