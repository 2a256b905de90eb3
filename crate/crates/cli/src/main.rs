//! Command-line front end: dataset synthesis, training, evaluation, and
//! camera-rotation calibration as reproducible subcommands.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure. Log verbosity via the RUST_LOG environment variable.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mvpose::calib::{calibrate, PredictionSource};
use mvpose::losses::LossWeights;
use mvpose::metrics::MetricReport;
use mvpose::regressor::Checkpoint;
use mvpose::skeleton::Skeleton;
use mvpose::synth::{generate_dataset, CaptureConfig, Dataset, RotationModel};
use mvpose::trainer::{self, RotationSource, TrainConfig};
use mvpose::PoseDistance;

#[derive(Parser)]
#[command(name = "mvpose", version, about = "Weakly-supervised multi-view 3D pose experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view dataset.
    Synth(SynthArgs),
    /// Train a pose regressor (supervised baseline or weak supervision).
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labeled dataset.
    Eval(EvalArgs),
    /// Estimate camera rotations from per-view predictions.
    Calib(CalibArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Capture config JSON (fields of CaptureConfig; missing fields take
    /// defaults).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Subjects that keep their labels (all others become multi-view
    /// unlabeled samples).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    labeled_subjects: Vec<usize>,
    /// Skeleton JSON; defaults to the built-in 17-joint skeleton.
    #[arg(long)]
    skeleton: Option<PathBuf>,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Supervised training only (multi-view and regularizer weights zero).
    Baseline,
    /// Full weakly-supervised objective.
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum RotationsArg {
    Known,
    Estimated,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Se,
    Nse,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset JSON.
    #[arg(long)]
    data: PathBuf,
    /// Validation dataset JSON (its labeled samples are the validation set).
    #[arg(long)]
    val: PathBuf,
    /// Train config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Weak)]
    mode: Mode,
    #[arg(long, value_enum)]
    rotations: Option<RotationsArg>,
    #[arg(long, value_enum)]
    distance: Option<DistanceArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    pretrain_iterations: Option<u64>,
    /// Output directory for checkpoint.json, gamma.json and trainlog.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Evaluation dataset JSON (labeled samples are evaluated).
    #[arg(long)]
    data: PathBuf,
    /// Inject the labels as predictions instead of running a network.
    #[arg(long, default_value_t = false)]
    oracle: bool,
    /// Write one metric row; with --compare, a second row holds the
    /// column-wise difference (this checkpoint minus the other).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long, default_value_t = mvpose::metrics::PCK_THRESHOLD_MM)]
    pck_threshold_mm: f64,
}

#[derive(Args)]
struct CalibArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Use the stored per-view poses instead of network predictions.
    #[arg(long, default_value_t = false)]
    oracle: bool,
    /// Per-rotation CSV dump path.
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<mvpose::Error> for CliError {
    fn from(e: mvpose::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Calib(args) => cmd_calib(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn read_config(path: &Path) -> Result<CaptureConfig, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "capture config not found: {}",
            path.display()
        )));
    }
    Ok(CaptureConfig::load(path)?)
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let mut config = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    let skeleton = match &args.skeleton {
        Some(path) => Skeleton::load(path)?,
        None => Skeleton::default_human(),
    };
    let dataset = generate_dataset(&config, &skeleton, &args.labeled_subjects)?;
    dataset.save(&args.out)?;
    let mode = match config.rotation_model {
        RotationModel::Static => "static",
        RotationModel::PerFrame => "per-frame",
    };
    println!(
        "dataset: {} subjects x {} frames, {} cameras ({mode}), noise {} mm, seed {}",
        config.n_subjects,
        config.frames_per_subject,
        config.n_cameras,
        config.noise_sigma_mm,
        config.rng_seed
    );
    println!(
        "labeled: {} samples (subjects {:?}); unlabeled: {} multi-view samples",
        dataset.labeled.len(),
        args.labeled_subjects,
        dataset.unlabeled.len()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::Usage(format!(
                    "train config not found: {}",
                    path.display()
                )));
            }
            TrainConfig::load(path)?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(iters) = args.iterations {
        config.iterations = iters;
    }
    if let Some(iters) = args.pretrain_iterations {
        config.pretrain_iterations = iters;
    }
    if let Some(r) = args.rotations {
        config.rotations = match r {
            RotationsArg::Known => RotationSource::Known,
            RotationsArg::Estimated => RotationSource::Estimated,
        };
    }
    if let Some(d) = args.distance {
        config.distance = match d {
            DistanceArg::Se => PoseDistance::Se,
            DistanceArg::Nse => PoseDistance::Nse,
        };
    }
    if let Mode::Baseline = args.mode {
        config.weights = LossWeights {
            multiview: 0.0,
            regularizer: 0.0,
            ..config.weights
        };
    }

    let dataset = Dataset::load(&args.data)?;
    let val = Dataset::load(&args.val)?;
    if val.labeled.is_empty() {
        return Err(CliError::Usage(format!(
            "validation dataset {} has no labeled samples",
            args.val.display()
        )));
    }

    std::fs::create_dir_all(&args.out_dir).map_err(mvpose::Error::from)?;
    let outcome = trainer::train(&dataset, &config, &val.labeled)?;
    let ckpt_path = args.out_dir.join("checkpoint.json");
    let gamma_path = args.out_dir.join("gamma.json");
    let log_path = args.out_dir.join("trainlog.csv");
    outcome.checkpoint.save(&ckpt_path)?;
    outcome.gamma.save(&gamma_path)?;
    std::fs::write(&log_path, outcome.log.to_csv()).map_err(mvpose::Error::from)?;

    if outcome.log.skipped_groups > 0 {
        log::warn!(
            "{} groups skipped due to failed rotation estimation",
            outcome.log.skipped_groups
        );
    }
    println!(
        "trained {} iterations ({} pretrain + {} weak); final val NMPJPE {:.3} mm",
        config.pretrain_iterations + config.iterations,
        config.pretrain_iterations,
        config.iterations,
        outcome.log.final_val_nmpjpe().unwrap_or(f64::NAN)
    );
    println!(
        "wrote {}, {}, {}",
        ckpt_path.display(),
        gamma_path.display(),
        log_path.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let dataset = Dataset::load(&args.data)?;
    if dataset.labeled.is_empty() {
        return Err(CliError::Usage(format!(
            "dataset {} has no labeled samples to evaluate",
            args.data.display()
        )));
    }
    let report = if args.oracle {
        trainer::evaluate_oracle(&dataset.labeled, &dataset.skeleton, args.pck_threshold_mm)?
    } else {
        let ckpt_path = args
            .ckpt
            .as_ref()
            .ok_or_else(|| CliError::Usage("--ckpt required unless --oracle".into()))?;
        let ckpt = Checkpoint::load(ckpt_path)?;
        trainer::evaluate(&ckpt, &dataset.labeled, &dataset.skeleton, args.pck_threshold_mm)?
    };

    let mut csv = format!("{}\n{}\n", MetricReport::CSV_HEADER, report.csv_row());
    if let Some(other_path) = &args.compare {
        let other_ckpt = Checkpoint::load(other_path)?;
        let other = trainer::evaluate(
            &other_ckpt,
            &dataset.labeled,
            &dataset.skeleton,
            args.pck_threshold_mm,
        )?;
        csv.push_str(&report.delta(&other).csv_row());
        csv.push('\n');
    }
    std::fs::write(&args.out, &csv).map_err(mvpose::Error::from)?;
    print!("{csv}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_calib(args: CalibArgs) -> Result<(), CliError> {
    let dataset = Dataset::load(&args.data)?;
    let (source, ckpt) = if args.oracle {
        (PredictionSource::Oracle, None)
    } else {
        let path = args
            .ckpt
            .as_ref()
            .ok_or_else(|| CliError::Usage("--ckpt required unless --oracle".into()))?;
        (PredictionSource::Network, Some(Checkpoint::load(path)?))
    };
    let report = calibrate(&dataset, source, ckpt.as_ref())?;
    std::fs::write(&args.out, report.to_csv()).map_err(mvpose::Error::from)?;
    match (report.mean_deg, report.median_deg, report.max_deg) {
        (Some(mean), Some(median), Some(max)) => println!(
            "rotation error over {} views: mean {:.4} deg, median {:.4} deg, max {:.4} deg",
            report.records.len(),
            mean,
            median,
            max
        ),
        _ => println!(
            "estimated {} rotations (no ground truth stored)",
            report.records.len()
        ),
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
