use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "detkit", about = "Dataset engineering and detection evaluation for animal detection in video")]
pub struct Cli {
    /// TOML file with default values for any subcommand flag. Flags given
    /// on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: one per core). Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a train/test split plan from a dataset manifest.
    Plan(PlanArgs),
    /// Paste source animals into background images.
    Composite(CompositeArgs),
    /// Move an annotated mask to a new frame by its box motion.
    Maskprop(MaskpropArgs),
    /// Derive a mask inside a box from an edge map.
    Maskrefine(MaskrefineArgs),
    /// Score detections against ground truth (mAP, mRP, cRP).
    Evaluate(EvaluateArgs),
    /// Fill detector gaps in video with tracker boxes.
    Fuse(FuseArgs),
    /// Merge several detection files with non-maximum suppression.
    Pool(PoolArgs),
    /// Run plan, composite and evaluate from the config file.
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    PerClassFromCompleteSequences,
    EvenAcrossSequences,
    PrefixFraction,
    PerSequenceEven,
    StaticPerClass,
    PosesPerBackground,
}

#[derive(Debug, Default, Args, serde::Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PlanArgs {
    #[arg(long, value_name = "CSV")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyName>,
    /// Images per class.
    #[arg(long)]
    pub n: Option<usize>,
    /// Fraction of every sequence, in (0, 1].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Frames per sequence, or poses per background.
    #[arg(long)]
    pub k: Option<usize>,
    /// Sequences per class for per-sequence-even.
    #[arg(long)]
    pub sequences: Option<usize>,
    /// Comma-separated class subset (default: every class in the manifest).
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "JSON")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendName {
    Mask,
    Gaussian,
}

#[derive(Debug, Default, Args, serde::Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CompositeArgs {
    /// Directory of `<class>/<pose>.png|jpg` source images.
    #[arg(long, value_name = "DIR")]
    pub sources: Option<PathBuf>,
    /// Directory of `<class>/<pose>.png` full-image masks.
    #[arg(long, value_name = "DIR")]
    pub masks: Option<PathBuf>,
    /// Directory of `<background>.png|jpg` images.
    #[arg(long, value_name = "DIR")]
    pub backgrounds: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<BlendName>,
    /// Gaussian feathering width in pixels.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub scale_min: Option<f64>,
    #[arg(long)]
    pub scale_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, serde::Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MaskpropArgs {
    #[arg(long, value_name = "PNG")]
    pub prev_mask: Option<PathBuf>,
    /// `x_min,y_min,x_max,y_max`
    #[arg(long, value_name = "BOX")]
    pub prev_box: Option<String>,
    #[arg(long, value_name = "BOX")]
    pub cur_box: Option<String>,
    #[arg(long, value_name = "PNG")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, serde::Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MaskrefineArgs {
    /// Grayscale edge-strength image.
    #[arg(long, value_name = "PNG")]
    pub edges: Option<PathBuf>,
    #[arg(long = "box", value_name = "BOX")]
    #[serde(rename = "box")]
    pub bbox: Option<String>,
    /// Odd window size of the local mean.
    #[arg(long)]
    pub window: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub offset: Option<f32>,
    #[arg(long, value_name = "PNG")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, serde::Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvaluateArgs {
    #[arg(long, value_name = "CSV")]
    pub gt: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    pub det: Option<PathBuf>,
    #[arg(long)]
    pub iou: Option<f64>,
    #[arg(long, value_name = "JSON")]
    pub out: Option<PathBuf>,
    /// Also write every recall/precision curve as CSV.
    #[arg(long, value_name = "CSV")]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    /// Constant position.
    Cp,
    /// Constant velocity.
    Cv,
}

#[derive(Debug, Default, Args, serde::Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FuseArgs {
    /// Detections with `sequence_id,frame_index` columns.
    #[arg(long, value_name = "CSV")]
    pub det: Option<PathBuf>,
    /// Manifest listing every video frame, to fill frames without
    /// detections.
    #[arg(long, value_name = "CSV")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub assoc_iou: Option<f64>,
    #[arg(long)]
    pub max_age: Option<u32>,
    #[arg(long)]
    pub max_trackers: Option<usize>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, serde::Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PoolArgs {
    #[arg(long = "det", value_name = "CSV")]
    #[serde(rename = "det")]
    pub dets: Vec<PathBuf>,
    #[arg(long)]
    pub nms_iou: Option<f64>,
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}
