//! Command-line driver.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 on a data or format
//! error. Messages go to standard error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::data::{load_grid, load_image, load_labels, save_grid, save_image, save_labels, synth_volume, SynthParams};
use crate::error::Error;
use crate::experiment::{self, ExperimentConfig, Supervision};
use crate::labeling::{labels_from_full_gt, labels_from_segments, LabelAssignment, DEFAULT_JACCARD_THRESHOLD};
use crate::learner::{Mode, Model, TrainConfig};
use crate::mergetree::{build_merge_tree, MergeTree};
use crate::metrics::adapted_rand_error;
use crate::pipeline::{clique_features, features_from_grid, features_to_grid, fit_model, segment, superpixels, TrainInput};

#[derive(Debug, Parser)]
#[command(name = "sshmt", version, about = "Hierarchical merge tree segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic confidence map and its ground truth.
    Synth(SynthArgs),
    /// Watershed superpixels of a confidence map.
    Watershed(WatershedArgs),
    /// Build the merge tree of a superpixel map.
    Tree(TreeArgs),
    /// Extract clique features.
    Features(FeaturesArgs),
    /// Derive clique labels from ground truth.
    Labels(LabelsArgs),
    /// Train the boundary classifier.
    Train(TrainArgs),
    /// Segment an image with a trained model.
    Infer(InferArgs),
    /// Adapted Rand error of a segmentation.
    Eval(EvalArgs),
    /// Supervision sweep on synthetic images.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON synthesis parameters; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid size as nx,ny,nz.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence map output.
    #[arg(short, long)]
    out: PathBuf,
    /// Ground-truth label map output.
    #[arg(long)]
    gt: PathBuf,
}

#[derive(Debug, Args)]
pub struct WatershedArgs {
    #[arg(long)]
    conf: PathBuf,
    /// Box-filter radius applied before flooding.
    #[arg(long, default_value_t = 0)]
    smooth: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[arg(long)]
    sp: PathBuf,
    #[arg(long)]
    conf: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    sp: PathBuf,
    #[arg(long)]
    conf: PathBuf,
    /// Raw intensity image for the boundary intensity feature.
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelsArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    sp: PathBuf,
    /// Full ground-truth label map.
    #[arg(long, conflicts_with = "segments", required_unless_present = "segments")]
    gt: Option<PathBuf>,
    /// JSON list of annotated segments, each a list of voxel indices.
    #[arg(long)]
    segments: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_JACCARD_THRESHOLD)]
    threshold: f64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `tree.json,features.grd[,labels.json]`; repeat per image.
    #[arg(long = "input", required = true)]
    inputs: Vec<String>,
    #[arg(long, default_value = "sshmt")]
    mode: Mode,
    /// JSON training configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-iteration objective trace (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    sp: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    seg: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Count voxels whose ground truth is 0.
    #[arg(long)]
    keep_zero: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment configuration; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds both the image generator and the label subsampling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<Mode>>,
    #[arg(long, value_enum)]
    supervision: Option<SupervisionArg>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SupervisionArg {
    Cliques,
    Segments,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    Ok(serde_json::from_str(&read_text(path)?).map_err(Error::from)?)
}

fn load_tree(path: &Path) -> CliResult<MergeTree> {
    Ok(MergeTree::from_json(&read_text(path)?)?)
}

fn load_features(path: &Path) -> CliResult<ndarray::Array2<f64>> {
    Ok(features_from_grid(load_grid(path)?)?)
}

/// Parse and run; returns the exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Watershed(a) => {
            let conf = load_image(&a.conf)?;
            save_labels(&superpixels(&conf, a.smooth), &a.out)?;
            Ok(())
        }
        Command::Tree(a) => {
            let sp = load_labels(&a.sp)?;
            let conf = load_image(&a.conf)?;
            let tree = build_merge_tree(&sp, &conf)?;
            write_text(&a.out, &tree.to_json()?)
        }
        Command::Features(a) => {
            let tree = load_tree(&a.tree)?;
            let sp = load_labels(&a.sp)?;
            let conf = load_image(&a.conf)?;
            let raw = a.raw.as_deref().map(load_image).transpose()?;
            let x = clique_features(&tree, &sp, &conf, raw.as_ref())?;
            save_grid(&features_to_grid(&x), &a.out)?;
            Ok(())
        }
        Command::Labels(a) => labels(a),
        Command::Train(a) => train(a),
        Command::Infer(a) => {
            let model = Model::from_json(&read_text(&a.model)?)?;
            let tree = load_tree(&a.tree)?;
            let x = load_features(&a.features)?;
            let sp = load_labels(&a.sp)?;
            save_labels(&segment(&model, &tree, &x, &sp)?, &a.out)?;
            Ok(())
        }
        Command::Eval(a) => {
            let seg = load_labels(&a.seg)?;
            let gt = load_labels(&a.gt)?;
            let r = adapted_rand_error(&seg, &gt, !a.keep_zero)?;
            println!("{:.6},{:.6},{:.6}", r.error, r.precision, r.recall);
            Ok(())
        }
        Command::Experiment(a) => run_experiment(a),
    }
}

fn synth(a: SynthArgs) -> CliResult {
    let mut p: SynthParams = match &a.config {
        Some(path) => read_json(path)?,
        None => SynthParams::default(),
    };
    if let Some(d) = a.dims {
        p.dims = d
            .try_into()
            .map_err(|_| CliError::Usage("--dims takes exactly three values nx,ny,nz".into()))?;
    }
    if let Some(c) = a.cells {
        p.n_cells = c;
    }
    if let Some(n) = a.noise {
        p.noise_std = n;
    }
    if let Some(w) = a.width {
        p.membrane_width = w;
    }
    if let Some(s) = a.seed {
        p.seed = s;
    }
    let (conf, gt) = synth_volume(&p)?;
    save_image(&conf, &a.out)?;
    save_labels(&gt, &a.gt)?;
    Ok(())
}

fn labels(a: LabelsArgs) -> CliResult {
    let tree = load_tree(&a.tree)?;
    let sp = load_labels(&a.sp)?;
    let out: LabelAssignment = match (&a.gt, &a.segments) {
        (Some(gt), _) => labels_from_full_gt(&tree, &sp, &load_labels(gt)?)?,
        (None, Some(seg)) => {
            let segments: Vec<Vec<usize>> = read_json(seg)?;
            labels_from_segments(&tree, &sp, &segments, a.threshold)?
        }
        (None, None) => return Err(CliError::Usage("one of --gt or --segments is required".into())),
    };
    write_text(&a.out, &out.to_json(&tree)?)
}

struct LoadedInput {
    tree: MergeTree,
    features: ndarray::Array2<f64>,
    labels: Option<LabelAssignment>,
}

fn load_input(spec: &str) -> CliResult<LoadedInput> {
    let parts: Vec<&str> = spec.split(',').collect();
    if !(2..=3).contains(&parts.len()) || parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!(
            "--input {spec:?}: expected tree.json,features.grd[,labels.json]"
        )));
    }
    let tree = load_tree(Path::new(parts[0]))?;
    let features = load_features(Path::new(parts[1]))?;
    let labels = match parts.get(2) {
        Some(p) => Some(LabelAssignment::from_json(&tree, &read_text(Path::new(p))?)?),
        None => None,
    };
    Ok(LoadedInput {
        tree,
        features,
        labels,
    })
}

fn train(a: TrainArgs) -> CliResult {
    let cfg: TrainConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => TrainConfig::default(),
    };
    let loaded = a
        .inputs
        .iter()
        .map(|s| load_input(s))
        .collect::<CliResult<Vec<_>>>()?;
    let inputs: Vec<TrainInput<'_>> = loaded
        .iter()
        .map(|l| TrainInput {
            tree: &l.tree,
            features: &l.features,
            labels: l.labels.as_ref(),
        })
        .collect();
    let (model, trained) = fit_model(&inputs, &cfg, a.mode)?;
    if let Some(path) = &a.trace {
        write_text(path, &trained.trace_csv())?;
    }
    write_text(&a.out, &model.to_json()?)
}

fn run_experiment(a: ExperimentArgs) -> CliResult {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
        cfg.synth.seed = s;
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(f) = a.fractions {
        cfg.fractions = f;
    }
    if let Some(m) = a.modes {
        cfg.modes = m;
    }
    if let Some(s) = a.supervision {
        cfg.supervision = match s {
            SupervisionArg::Cliques => Supervision::Cliques,
            SupervisionArg::Segments => Supervision::Segments,
        };
    }
    let result = experiment::run(&cfg)?;
    write_text(&a.out, &result.to_csv())
}
