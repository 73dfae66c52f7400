use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use spectral_spc::pipeline::{self, KChoice, RunConfig, SimulateKind, StageReport, Status};

#[derive(Parser)]
#[command(name = "spectral-spc", version, about = "Registration-free SPC of 3D part geometry from Laplace-Beltrami spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Every flag overrides the config key of the same name.
#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory of part meshes; filename order is time order.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of eigenvalues, or "auto".
    #[arg(long, global = true)]
    k: Option<KChoice>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    target_vertices: Option<usize>,
    /// Reference sample size.
    #[arg(long, global = true)]
    m0: Option<usize>,
    /// Phase I significance level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Phase II EWMA weight.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Phase II in-control ARL target.
    #[arg(long, global = true)]
    arl0: Option<f64>,
    /// Landmark pairs (CAD xyz, part xyz per line) for the diagnose stage.
    #[arg(long, global = true)]
    correspondences: Option<PathBuf>,
    /// Part mesh for the roi and diagnose stages.
    #[arg(long, global = true)]
    part: Option<PathBuf>,
    /// CAD mesh for the roi and diagnose stages.
    #[arg(long, global = true)]
    cad: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, repair and remesh the dataset; write the manifest.
    Preprocess,
    /// Eigenvalues of every processed part.
    Spectrum,
    /// Choose k from the reconstruction curve.
    SelectK,
    /// Retrospective test of the first m0 parts.
    Phase1,
    /// Online chart of the parts after the first m0.
    Phase2,
    /// Locate the region that differs from the CAD model.
    Roi,
    /// Register CAD onto the part and map deviations.
    Diagnose,
    /// Generate a synthetic dataset.
    Simulate {
        #[arg(long, value_enum, default_value = "meshes")]
        kind: Kind,
        #[arg(long)]
        parts: Option<usize>,
        /// 1-based index of the first shifted part.
        #[arg(long)]
        shift_time: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// preprocess, spectrum, phase1 and phase2 in sequence.
    Run,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Kind {
    Meshes,
    Spectra,
}

fn config(c: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(v) = &c.dataset {
        cfg.dataset_dir = v.clone();
    }
    if let Some(v) = &c.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = c.k {
        cfg.spectrum.k = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.target_vertices {
        cfg.preprocess.target_vertices = v;
    }
    if let Some(v) = c.m0 {
        cfg.spc.m0 = v;
    }
    if let Some(v) = c.alpha {
        cfg.phase1.alpha = v;
    }
    if let Some(v) = c.lambda {
        cfg.phase2.lambda = v;
    }
    if let Some(v) = c.arl0 {
        cfg.phase2.arl0 = v;
    }
    if let Some(v) = &c.correspondences {
        cfg.diagnose.correspondences = Some(v.clone());
    }
    if let Some(v) = &c.part {
        cfg.roi.part = Some(v.clone());
        cfg.diagnose.part = Some(v.clone());
    }
    if let Some(v) = &c.cad {
        cfg.roi.cad = Some(v.clone());
        cfg.diagnose.cad = Some(v.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<StageReport> {
    let mut cfg = config(&cli.common)?;
    let report = match cli.command {
        Command::Preprocess => pipeline::run_preprocess(&cfg)?,
        Command::Spectrum => pipeline::run_spectra(&cfg)?,
        Command::SelectK => pipeline::run_select_k(&cfg)?.1,
        Command::Phase1 => pipeline::run_phase1(&cfg)?,
        Command::Phase2 => pipeline::run_phase2(&cfg)?,
        Command::Roi => pipeline::run_roi(&cfg)?,
        Command::Diagnose => pipeline::run_diagnose(&cfg)?,
        Command::Simulate { kind, parts, shift_time, noise } => {
            let s = &mut cfg.simulate;
            s.kind = match kind {
                Kind::Meshes => SimulateKind::Meshes,
                Kind::Spectra => SimulateKind::Spectra,
            };
            if let Some(v) = parts {
                s.parts = v;
            }
            if shift_time.is_some() {
                s.shift_time = shift_time;
            }
            if let Some(v) = noise {
                s.noise_sigma = v;
            }
            pipeline::run_simulate(&cfg)?
        }
        Command::Run => pipeline::run_all(&cfg)?,
    };
    Ok(report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Ok(v) = std::env::var("SPECTRAL_SPC_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring SPECTRAL_SPC_THREADS = '{v}'"),
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // clap's own usage-error code (2) would read as an alarm
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(r) => {
            println!("{}", r.summary.trim_end());
            for p in &r.outputs {
                log::debug!("wrote {}", p.display());
            }
            match r.status {
                Status::Ok => ExitCode::SUCCESS,
                Status::Alarm => ExitCode::from(2),
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
