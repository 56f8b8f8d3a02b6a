use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "objectness", version, about = "Pixel objectness: class-agnostic foreground segmentation and its applications")]
pub struct Cli {
    /// More progress output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic segmentation dataset.
    Synth(SynthArgs),
    /// Train a network and write its weight archive and loss log.
    Train(TrainArgs),
    /// Predict foreground masks for one image or a whole dataset.
    Segment(SegmentArgs),
    /// Score predicted masks against a dataset's ground truth.
    Eval(EvalArgs),
    /// Content-aware resizing guided by the foreground.
    Retarget(RetargetArgs),
    /// Describe a dataset and persist a retrieval index.
    BuildIndex(BuildIndexArgs),
    /// Rank an index against a query image.
    Retrieve(RetrieveArgs),
    /// Leave-one-out mean average precision of a dataset or index.
    RetrieveEval(RetrieveEvalArgs),
    /// Gain table between two evaluation or retrieval reports.
    DiffReports(DiffArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Comma-separated subset of rectangle, ellipse, triangle, ring.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Comma-separated subset of flat, gradient, noise, stripes.
    #[arg(long, value_delimiter = ',')]
    pub textures: Option<Vec<String>>,
    /// `lo,hi` colour separation range in [0, 1].
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub separation: Option<Vec<f32>>,
    /// `lo,hi` objects per image.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub shapes: Option<Vec<usize>>,
    /// `lo,hi` object extent relative to the shorter side.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub scale: Option<Vec<f32>>,
    /// Build a retrieval benchmark with this many classes instead.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, requires = "classes")]
    pub per_class: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossResolutionArg {
    Logits,
    Input,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network preset: toy or paper.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_decay_every: Option<u64>,
    #[arg(long)]
    pub crop: Option<usize>,
    #[arg(long, value_enum)]
    pub loss_resolution: Option<LossResolutionArg>,
    /// Continue from the checkpoint in this run directory.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Also write the archive every N iterations.
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SegmentMethod {
    /// The trained network.
    Net,
    /// Distance from the border colour, Otsu threshold.
    Color,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long, default_value = "net", value_enum)]
    pub method: SegmentMethod,
    #[arg(long, required_if_eq("method", "net"))]
    pub weights: Option<PathBuf>,
    /// Single input image; `--out` is then the mask PNG.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub image: Option<PathBuf>,
    /// Dataset directory; `--out` is then a directory of `<id>.png` masks.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// 8-bit objectness map (single image only).
    #[arg(long, requires = "image")]
    pub prob: Option<PathBuf>,
    /// Last-pool activation heatmap over the image (single image only).
    #[arg(long, requires = "image")]
    pub activation: Option<PathBuf>,
    /// Ground-truth mask (0/255, or a {0, 1, 255} label mask); prints the Jaccard index.
    #[arg(long, requires = "image")]
    pub gt: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Seg,
    Corloc,
    Separability,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub mode: EvalMode,
    /// Directory of predicted `<id>.png` masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Dataset directory holding images and ground-truth masks.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML box manifest (`[[boxes]] id, x_min, y_min, x_max, y_max`) for corloc.
    #[arg(long)]
    pub boxes: Option<PathBuf>,
    /// `name=dir` baseline predictions compared in separability mode.
    #[arg(long = "baseline")]
    pub baselines: Vec<String>,
    /// Bucket table output for separability mode (stdout otherwise).
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetargetArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Foreground mask; the network is not used.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// `p/q` or a decimal in (0, 1], applied to both sides.
    #[arg(long, conflicts_with_all = ["width", "height"])]
    pub fraction: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Plain seam carving without the foreground boost.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Side-by-side input and output.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Ground-truth foreground; prints how many of its pixels were carved.
    #[arg(long)]
    pub gt: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Images are resized to this square side before description.
    #[arg(long, default_value_t = 97)]
    pub input_size: usize,
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// full, fg or ff.
    #[arg(long)]
    pub mode: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Expected index mode; a mismatch is an error.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct RetrieveEvalArgs {
    /// Evaluate a stored index.
    #[arg(long, conflicts_with_all = ["data", "weights"])]
    pub index: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub weights: Option<PathBuf>,
    #[arg(long, requires = "weights")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 97)]
    pub input_size: usize,
    #[arg(long, required_unless_present = "index")]
    pub mode: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    /// Reference report.
    pub base: PathBuf,
    /// Report compared against the reference.
    pub other: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
