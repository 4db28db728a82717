//! Command-line front end: `synth` renders a scene into per-view inputs,
//! `lift`/`aggregate`/`visibility` run the transform stages over a shared
//! working directory, `eval` scores the result, and `pipeline` chains all
//! of them in one process. Reports go to standard output as JSON; tensors
//! go to files.

use clap::{Parser, Subcommand, ValueEnum};
use pdbev_core::{
    load_grid, load_rig, load_scene, with_threads, AggMode, Error, EvalOpts, LiftMode,
    PipelineConfig, PredSource, Result, SynthOpts, VisSource,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pdbev",
    version,
    about = "Parametric-depth BEV feature transformation"
)]
struct Cli {
    /// Worker thread cap; the PDBEV_THREADS variable is the fallback when
    /// the flag is absent, and 0 means one worker per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LiftModeArg {
    Parametric,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggModeArg {
    Occupancy,
    Concat,
}

#[derive(Clone, Copy, ValueEnum)]
enum VisModeArg {
    Params,
    Dense,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene into per-view inputs and BEV labels.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Working directory for artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Diversity of the delta-like depth parameters.
        #[arg(long, default_value_t = 0.05)]
        b_gt: f64,
    },
    /// Lift per-view features onto the voxel grid.
    Lift {
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Likelihood-weighted lifting, or unweighted baseline.
        #[arg(long, value_enum, default_value_t = LiftModeArg::Parametric)]
        mode: LiftModeArg,
    },
    /// Collapse the lifted volume to BEV feature maps.
    Aggregate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Occupancy-weighted compression, or pillar concatenation.
        #[arg(long, value_enum, default_value_t = AggModeArg::Occupancy)]
        mode: AggModeArg,
        /// Occupancy bias added to every voxel before normalizing.
        #[arg(long, default_value_t = pdbev_core::DEFAULT_OCCUPANCY_BIAS)]
        bias: f64,
    },
    /// Compute the BEV visibility map.
    Visibility {
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Closed form from parameter maps, or from rendered dense depth.
        #[arg(long, value_enum, default_value_t = VisModeArg::Params)]
        mode: VisModeArg,
        #[arg(long, default_value_t = 0.05)]
        b_gt: f64,
    },
    /// Score a BEV segmentation and print the JSON report.
    Eval {
        #[arg(long)]
        out: PathBuf,
        /// Prediction tensor; without it the aggregated evidence is
        /// thresholded and written to pred_seg.pdbt.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Ground-truth override; defaults to gt_seg.pdbt in the
        /// working directory.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Visibility-map override; defaults to vis_bev.pdbt.
        #[arg(long)]
        vis: Option<PathBuf>,
        /// Feature channel scored in evidence mode.
        #[arg(long, default_value_t = 2)]
        channel: usize,
        /// Evidence fraction a cell needs to count as positive.
        #[arg(long, default_value_t = 0.5)]
        pred_thresh: f64,
        /// Shorthand setting both taus at once.
        #[arg(long)]
        tau: Option<f64>,
        /// Visibility at or above this counts as surely visible.
        #[arg(long)]
        tau_vis: Option<f64>,
        /// Visibility below this counts as surely occluded.
        #[arg(long)]
        tau_occ: Option<f64>,
        /// Binarization threshold applied to the prediction.
        #[arg(long, default_value_t = 0.5)]
        thresh: f64,
    },
    /// Run synth, lift, aggregate, visibility, and eval in one process.
    Pipeline {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        b_gt: f64,
        #[arg(long, default_value_t = pdbev_core::DEFAULT_OCCUPANCY_BIAS)]
        bias: f64,
        #[arg(long, default_value_t = 2)]
        channel: usize,
        #[arg(long, default_value_t = 0.5)]
        pred_thresh: f64,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        tau_vis: Option<f64>,
        #[arg(long)]
        tau_occ: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        thresh: f64,
    },
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("PDBEV_THREADS") {
        Ok(s) => {
            let n = s.trim().parse::<usize>().map_err(|_| {
                Error::invalid(
                    "PDBEV_THREADS",
                    format!("expected a thread count, got {:?}", s),
                )
            })?;
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::invalid("PDBEV_THREADS", e.to_string())),
    }
}

fn taus(tau: Option<f64>, tau_vis: Option<f64>, tau_occ: Option<f64>) -> (f64, f64) {
    (
        tau_vis.or(tau).unwrap_or(0.5),
        tau_occ.or(tau).unwrap_or(0.5),
    )
}

fn to_json(report: &pdbev_core::VisReport) -> Result<String> {
    serde_json::to_string(report).map_err(|e| Error::domain(format!("report serialization: {}", e)))
}

fn run(command: Command) -> Result<Option<String>> {
    match command {
        Command::Synth {
            scene,
            rig,
            grid,
            out,
            b_gt,
        } => {
            let scene = load_scene(&scene)?;
            let rig = load_rig(&rig)?;
            let grid = load_grid(&grid)?;
            pdbev_core::run_synth(&scene, &rig, &grid, &out, &SynthOpts { b_gt })?;
            Ok(None)
        }
        Command::Lift {
            rig,
            grid,
            out,
            mode,
        } => {
            let rig = load_rig(&rig)?;
            let grid = load_grid(&grid)?;
            let mode = match mode {
                LiftModeArg::Parametric => LiftMode::Parametric,
                LiftModeArg::Uniform => LiftMode::Uniform,
            };
            pdbev_core::run_lift(&rig, &grid, &out, mode)?;
            Ok(None)
        }
        Command::Aggregate {
            grid,
            out,
            mode,
            bias,
        } => {
            let grid = load_grid(&grid)?;
            let mode = match mode {
                AggModeArg::Occupancy => AggMode::Occupancy,
                AggModeArg::Concat => AggMode::Concat,
            };
            pdbev_core::run_aggregate(&grid, &out, mode, bias)?;
            Ok(None)
        }
        Command::Visibility {
            rig,
            grid,
            out,
            mode,
            b_gt,
        } => {
            let rig = load_rig(&rig)?;
            let grid = load_grid(&grid)?;
            let source = match mode {
                VisModeArg::Params => VisSource::Params,
                VisModeArg::Dense => VisSource::Dense,
            };
            pdbev_core::run_visibility(&rig, &grid, &out, source, b_gt)?;
            Ok(None)
        }
        Command::Eval {
            out,
            pred,
            gt,
            vis,
            channel,
            pred_thresh,
            tau,
            tau_vis,
            tau_occ,
            thresh,
        } => {
            let (tau_vis, tau_occ) = taus(tau, tau_vis, tau_occ);
            let source = match pred {
                Some(p) => PredSource::File(p),
                None => PredSource::Evidence {
                    channel,
                    thresh: pred_thresh,
                },
            };
            let report = pdbev_core::run_eval(
                &out,
                &source,
                &EvalOpts {
                    tau_vis,
                    tau_occ,
                    seg_thresh: thresh,
                    gt,
                    vis,
                },
            )?;
            Ok(Some(to_json(&report)?))
        }
        Command::Pipeline {
            scene,
            rig,
            grid,
            out,
            b_gt,
            bias,
            channel,
            pred_thresh,
            tau,
            tau_vis,
            tau_occ,
            thresh,
        } => {
            let scene = load_scene(&scene)?;
            let rig = load_rig(&rig)?;
            let grid = load_grid(&grid)?;
            let (tau_vis, tau_occ) = taus(tau, tau_vis, tau_occ);
            let report = pdbev_core::run_pipeline(
                &scene,
                &rig,
                &grid,
                &out,
                &PipelineConfig {
                    b_gt,
                    bias,
                    tau_vis,
                    tau_occ,
                    seg_thresh: thresh,
                    pred_channel: channel,
                    pred_thresh,
                },
            )?;
            Ok(Some(to_json(&report)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match resolve_threads(cli.threads) {
        Ok(threads) => with_threads(threads, || run(cli.command)).and_then(|r| r),
        Err(e) => Err(e),
    };
    match outcome {
        Ok(Some(report)) => {
            println!("{}", report);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
