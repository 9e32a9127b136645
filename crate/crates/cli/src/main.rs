//! `cyscolor`: dataset building, training, generation, colorization,
//! evaluation and the HTTP service behind one binary.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cyscolor", version, about = "Culture-conditioned palette generation and colorization")]
pub struct Cli {
    /// Configuration file (TOML); environment overrides still apply.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract and curate palettes for a directory of images with JSON sidecars.
    DatasetBuild(DatasetBuildArgs),
    /// Compare HSL statistics of two datasets with Welch t-tests.
    DatasetStats(DatasetStatsArgs),
    /// Train the palette network.
    TrainPalette(TrainPaletteArgs),
    /// Train the colorization network.
    TrainColorizer(TrainColorizerArgs),
    /// Generate a palette for a text, category and grayscale image.
    Generate(GenerateArgs),
    /// Colorize an image with a palette.
    Colorize(ColorizeArgs),
    /// Diversity grids, preference studies and vote tallies.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Run the HTTP service.
    Serve,
}

#[derive(Args, Debug)]
pub struct DatasetBuildArgs {
    /// Directory of PNG/JPEG images, each with a `<stem>.json` sidecar.
    #[arg(long)]
    pub images: PathBuf,
    /// Output JSONL file.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of clusters per image.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// ΔE76 distance under which candidates merge.
    #[arg(long, default_value_t = 10.0)]
    pub dedup_threshold: f64,
    /// Weight of color separation against cluster share when picking.
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StatsOn {
    Palette,
    Image,
}

#[derive(Args, Debug)]
pub struct DatasetStatsArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Compute statistics over palette colors or image pixels.
    #[arg(long, value_enum, default_value_t = StatsOn::Palette)]
    pub on: StatsOn,
    /// Image directory for `--a` when `--on image`.
    #[arg(long)]
    pub images_a: Option<PathBuf>,
    /// Image directory for `--b` when `--on image`.
    #[arg(long)]
    pub images_b: Option<PathBuf>,
    /// Randomly sample this many records from each side.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainCommon {
    /// Dataset JSONL.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory the dataset's image references resolve against.
    #[arg(long)]
    pub images: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Per-step losses as JSONL.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Per-modality encoding width.
    #[arg(long)]
    pub d: Option<usize>,
    /// Side of the grayscale image fed to the context encoder.
    #[arg(long)]
    pub image_resolution: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainPaletteArgs {
    #[command(flatten)]
    pub common: TrainCommon,
    #[arg(long)]
    pub hidden: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainColorizerArgs {
    #[command(flatten)]
    pub common: TrainCommon,
    /// Working resolution, a multiple of 4.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Weight of the L1 chroma term; 0 trains on the adversarial loss alone.
    #[arg(long)]
    pub recon_weight: Option<f64>,
    #[arg(long)]
    pub channels: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Palette checkpoint (defaults to the configured one).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub text: String,
    #[arg(long)]
    pub category: String,
    #[arg(long)]
    pub image: PathBuf,
}

#[derive(Args, Debug)]
pub struct ColorizeArgs {
    /// Colorizer checkpoint (defaults to the configured one).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub image: PathBuf,
    /// Five hex colors, comma-separated.
    #[arg(long)]
    pub palette: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "")]
    pub text: String,
    /// Defaults to the model's first category.
    #[arg(long)]
    pub category: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Varied {
    Text,
    Image,
    Category,
}

#[derive(Subcommand, Debug)]
pub enum EvaluateCommand {
    /// Palettes for one varied modality with the others held fixed.
    Diversity(DiversityArgs),
    /// Export a blinded pairwise study and its answer key.
    Study(StudyArgs),
    /// Count votes against an answer key.
    Tally(TallyArgs),
}

#[derive(Args, Debug)]
pub struct DiversityArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub varied: Varied,
    /// Value of the varied modality (an image path for `image`); repeatable.
    #[arg(long = "variant", required = true)]
    pub variants: Vec<String>,
    #[arg(long)]
    pub text: String,
    #[arg(long)]
    pub category: String,
    #[arg(long)]
    pub image: PathBuf,
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    /// JSONL of `{"keyword", "palette": [hex; 5]}` or `{"keyword", "image": path}`.
    #[arg(long)]
    pub ours: PathBuf,
    #[arg(long)]
    pub baseline: PathBuf,
    /// Bundle directory handed to raters.
    #[arg(long)]
    pub out: PathBuf,
    /// Answer key file, kept outside the bundle.
    #[arg(long)]
    pub key: PathBuf,
}

#[derive(Args, Debug)]
pub struct TallyArgs {
    /// CSV with header `pair_id,rater_id,choice`.
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let usage = e.downcast_ref::<commands::UsageError>().is_some();
            if cli.json {
                eprintln!("{}", serde_json::json!({ "error": format!("{e:#}"), "usage": usage }));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
