use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gazefusion", version, about = "Video and gaze fusion for aesthetic rating prediction")]
pub struct Cli {
    /// Flat `key = value` settings file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replace an existing completed output instead of refusing.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Turn a dataset manifest into model-ready samples.
    Preprocess(PreprocessArgs),
    /// Run all three training stages and test the result.
    Train(TrainArgs),
    /// Test a trained run under one inference mode.
    Evaluate(EvaluateArgs),
    /// Train and test modality ablations.
    Ablate(AblateArgs),
    /// Grad-CAM maps and temporal weights for one sample and task.
    Explain(ExplainArgs),
    /// Render tables and images from earlier outputs only.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub participants: Option<usize>,
    #[arg(long)]
    pub videos: Option<usize>,
    /// Videos shown to each participant.
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub fps: Option<u32>,
    /// Clip length in seconds.
    #[arg(long)]
    pub duration: Option<u32>,
    #[arg(long)]
    pub gaze_hz: Option<u32>,
    /// standard, localization or first-impression.
    #[arg(long)]
    pub design: Option<String>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Manifest file, or a directory holding manifest.toml.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub window_s: Option<u32>,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub work_width: Option<usize>,
    #[arg(long)]
    pub work_height: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct TrainOpts {
    #[arg(long)]
    pub stage1_epochs: Option<usize>,
    #[arg(long)]
    pub stage3_epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub freeze_fraction: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Stop a stage once running training accuracy reaches this value.
    #[arg(long)]
    pub target_train_accuracy: Option<f64>,
    /// Seed for initialization and batch order.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the participant split.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Preprocessed sample directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// full, no-attention, no-pupil or neither.
    #[arg(long, default_value = "full")]
    pub variant: String,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// full, video-only-zero or video-only-mean.
    #[arg(long, default_value = "full")]
    pub mode: String,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// grid (all four) or one of full, no-attention, no-pupil, neither.
    #[arg(long, default_value = "grid")]
    pub variant: String,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Dimension name or id.
    #[arg(long)]
    pub task: String,
    /// Sample id (`P00__V00`) or position in the sample index.
    #[arg(long)]
    pub sample: String,
    #[arg(long, default_value = "spatial.video_taskconv")]
    pub layer: String,
    #[arg(long, default_value = "full")]
    pub mode: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Train run directories; repeatable.
    #[arg(long)]
    pub run: Vec<PathBuf>,
    /// Output directory of an ablate command.
    #[arg(long)]
    pub ablation: Option<PathBuf>,
    /// Output directories of explain commands; repeatable.
    #[arg(long)]
    pub explain: Vec<PathBuf>,
    /// Render every n-th timestep in overlays.
    #[arg(long, default_value_t = 10)]
    pub every: usize,
}
