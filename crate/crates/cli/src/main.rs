use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tonewalk_cli::commands::{self, Produced};
use tonewalk_cli::config::{RunConfig, SidakChoice};
use tonewalk_cli::manifest::{manifest_path, unix_now, Invocation, FileDigest, Manifest, StudyKind};
use tonewalk_cli::{samples, CliError, Result};

#[derive(Parser)]
#[command(name = "tonewalk", version, about = "Simulate and test pivot-walk chirp signals")]
struct Cli {
    /// Worker threads for Monte-Carlo runs. Results do not depend on it.
    #[arg(long, global = true, env = "TONEWALK_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Family-wise significance level.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_parser = parse_sidak)]
    sidak_exponent: Option<SidakChoice>,
    #[arg(long)]
    classical_vr_scaling: bool,
}

fn parse_sidak(s: &str) -> std::result::Result<SidakChoice, String> {
    match s {
        "J" => Ok(SidakChoice::J),
        "J+1" => Ok(SidakChoice::JPlusOne),
        _ => Err("expected J or J+1".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate one record and its pivot sidecar.
    Simulate {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the joint detector on a sample file (.csv with t,re,im or binary).
    Detect {
        input: PathBuf,
        #[command(flatten)]
        o: Overrides,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytical and empirical detection probability over the alpha grid.
    Roc {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        analytical_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convergence studies.
    Study {
        #[arg(value_enum)]
        kind: StudyKind,
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a manifest and check the outputs reproduce.
    Replay {
        manifest: PathBuf,
        /// Write the main output here instead of over the original.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(a) = o.alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {a}")));
        }
        cfg.alpha = a;
    }
    if let Some(t) = o.trials {
        if t == 0 {
            return Err(CliError::Usage("--trials must be positive".into()));
        }
        cfg.trials = t;
    }
    if let Some(s) = o.sidak_exponent {
        cfg.sidak_exponent = s;
    }
    cfg.classical_vr_scaling |= o.classical_vr_scaling;
    Ok(cfg)
}

fn emit(command: Invocation, cfg: RunConfig, out: Option<&Path>) -> Result<u8> {
    let started = unix_now();
    let Produced { files, inputs, summary, exit_code } = commands::run(&command, &cfg, out)?;
    let mut outputs = Vec::new();
    for (path, bytes) in &files {
        if path.as_os_str() == "-" {
            std::io::stdout().write_all(bytes).map_err(|e| CliError::io("<stdout>", e))?;
        } else {
            samples::write_bytes(path, bytes)?;
            outputs.push(FileDigest::of_bytes(path, bytes));
        }
    }
    if let Some(out) = out {
        let m = Manifest {
            tool: "tonewalk".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seed: cfg.seed,
            config: cfg,
            started_unix: started,
            finished_unix: unix_now(),
            inputs,
            outputs,
            summary,
        };
        let path = manifest_path(out);
        samples::write_bytes(&path, m.to_json().as_bytes())?;
    }
    Ok(exit_code)
}

fn replay(path: &Path, out: Option<&Path>) -> Result<u8> {
    let m = Manifest::load(path)?;
    for d in &m.inputs {
        let now = FileDigest::of_file(&d.path)?;
        if now.sha256 != d.sha256 {
            return Err(CliError::Data(format!("input {} changed since the recorded run", d.path.display())));
        }
    }
    let main = m.outputs.first().map(|d| d.path.clone());
    let target = out.map(Path::to_path_buf).or(main.clone());
    let produced = commands::run(&m.command, &m.config, target.as_deref())?;
    // Outputs are compared positionally: the first is the main file, the rest
    // are sidecars derived from it.
    if produced.files.len() != m.outputs.len() {
        return Err(CliError::Data("replay produced a different set of files".into()));
    }
    for ((p, bytes), d) in produced.files.iter().zip(&m.outputs) {
        let got = FileDigest::of_bytes(p, bytes);
        if got.sha256 != d.sha256 {
            return Err(CliError::Data(format!("{} does not reproduce ({} != {})", p.display(), got.sha256, d.sha256)));
        }
        samples::write_bytes(p, bytes)?;
    }
    eprintln!("replayed {}: {} output(s) reproduced", path.display(), m.outputs.len());
    Ok(produced.exit_code)
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--workers: {e}")))?;
    }
    match cli.command {
        Command::Simulate { o, out } => emit(Invocation::Simulate, resolve(&o)?, Some(&out)),
        Command::Detect { input, o, out } => {
            let layout_from_config = o.config.is_some();
            emit(Invocation::Detect { input, layout_from_config }, resolve(&o)?, out.as_deref())
        }
        Command::Roc { o, analytical_only, out } => {
            let mut cfg = resolve(&o)?;
            cfg.analytical_only |= analytical_only;
            emit(Invocation::Roc, cfg, Some(&out))
        }
        Command::Study { kind, o, out } => emit(Invocation::Study { kind }, resolve(&o)?, Some(&out)),
        Command::Replay { manifest, out } => replay(&manifest, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

