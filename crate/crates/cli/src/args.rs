use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hlfsr_core::config::RunConfig;
use hlfsr_core::tensor::Precision;

/// Hybrid light-field spatial super-resolution.
///
/// Settings come from the built-in defaults, then the `--config` file, then
/// command-line flags; later sources win. Set HLFSR_THREADS to bound the
/// number of matrix-multiply threads.
#[derive(Debug, Parser)]
#[command(name = "hlfsr", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a hybrid light-field dataset.
    Datagen(DatagenArgs),
    /// Pre-train the central-view-synthesis network.
    PretrainCvs(StageArgs),
    /// Pre-train the backward-degradation network.
    PretrainBd(StageArgs),
    /// Train the super-resolution network against the frozen guides.
    Train(TrainArgs),
    /// Score the bicubic baseline and a trained model against ground truth.
    Eval(EvalArgs),
    /// Super-resolve every scene and write the views as PNG.
    Infer(InferArgs),
    /// Run the four-row ablation matrix.
    Ablate(StageArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Datagen(_) => "datagen",
            Command::PretrainCvs(_) => "pretrain-cvs",
            Command::PretrainBd(_) => "pretrain-bd",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Infer(_) => "infer",
            Command::Ablate(_) => "ablate",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Datagen(a) => &a.common,
            Command::PretrainCvs(a) | Command::PretrainBd(a) | Command::Ablate(a) => &a.common,
            Command::Train(a) => &a.stage.common,
            Command::Eval(a) => &a.common,
            Command::Infer(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ColorArg {
    Y,
    Rgb,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory; every artifact is written below it.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Dataset directory [default: <out>/dataset].
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Seed for data synthesis and training.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    /// Angular extent of the light field.
    #[arg(long = "A", value_name = "A")]
    pub angular: Option<usize>,
    /// Spatial scale factor.
    #[arg(long)]
    pub alpha: Option<usize>,
    /// Feature channels of the super-resolution network.
    #[arg(long)]
    pub channels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Square HR view extent.
    #[arg(long, value_name = "PIXELS")]
    pub hr_size: Option<usize>,
    #[arg(long, value_enum)]
    pub color: Option<ColorArg>,
    /// Standard deviation of the LR noise.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub common: Common,
    /// Epochs of the stage (every stage for `ablate`).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Continue from the stage's saved optimiser state.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub stage: StageArgs,
    /// CVS checkpoint [default: <out>/cvs.ckpt].
    #[arg(long, value_name = "FILE")]
    pub cvs: Option<PathBuf>,
    /// BD checkpoint [default: <out>/bd.ckpt].
    #[arg(long, value_name = "FILE")]
    pub bd: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// HLFSSR checkpoint [default: <out>/hlfssr.ckpt].
    #[arg(long, value_name = "FILE", conflicts_with_all = ["pred", "baseline_only"])]
    pub checkpoint: Option<PathBuf>,
    /// Score saved predictions laid out as `<DIR>/<scene>/view_u_v.png`
    /// instead of running a model.
    #[arg(long, value_name = "DIR", conflicts_with = "baseline_only")]
    pub pred: Option<PathBuf>,
    /// Score the bicubic baseline only.
    #[arg(long)]
    pub baseline_only: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    /// HLFSSR checkpoint [default: <out>/hlfssr.ckpt].
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
}

impl Common {
    /// Applies the shared flags on top of `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
            cfg.data.seed = s;
        }
        if let Some(p) = self.precision {
            cfg.precision = match p {
                PrecisionArg::F32 => Precision::F32,
                PrecisionArg::F64 => Precision::F64,
            };
        }
        if let Some(a) = self.angular {
            cfg.network.angular = a;
            cfg.data.angular = a;
        }
        if let Some(a) = self.alpha {
            cfg.network.alpha = a;
            cfg.data.alpha = a;
        }
        if let Some(c) = self.channels {
            cfg.network.channels = c;
        }
    }
}

impl DatagenArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.common.apply(cfg);
        if let Some(n) = self.scenes {
            cfg.data.scenes = n;
        }
        if let Some(s) = self.hr_size {
            cfg.data.hr_size = (s, s);
        }
        if let Some(c) = self.color {
            cfg.data.channels = match c {
                ColorArg::Y => 1,
                ColorArg::Rgb => 3,
            };
        }
        if let Some(s) = self.sigma {
            cfg.data.sigma = s;
        }
    }
}
