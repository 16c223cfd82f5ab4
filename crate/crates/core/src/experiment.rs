//! Supervision sweep on synthetic images: for each fraction of the available
//! labels and each repeat, train every requested mode on the same labelled
//! subset and score the test images.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{synth_volume, GridImage, LabelMap, SynthParams};
use crate::error::{Error, Result};
use crate::labeling::{labels_from_full_gt, labels_from_segments, LabelAssignment, DEFAULT_JACCARD_THRESHOLD};
use crate::learner::{Mode, TrainConfig, TraceRow};
use crate::mergetree::{build_merge_tree, MergeTree};
use crate::metrics::adapted_rand_error;
use crate::pipeline::{clique_features, fit_model, segment, superpixels, TrainInput};

/// What a supervision fraction counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Supervision {
    /// Labelled cliques from full ground truth.
    Cliques,
    /// Annotated ground-truth segments.
    Segments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synth: SynthParams,
    pub n_train: usize,
    pub n_test: usize,
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub modes: Vec<Mode>,
    pub supervision: Supervision,
    pub jaccard_threshold: f64,
    /// Box-filter radius applied before the watershed.
    pub smooth: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthParams::default(),
            n_train: 10,
            n_test: 10,
            fractions: vec![1.0, 0.25, 0.0625],
            repeats: 10,
            modes: vec![Mode::Hmt, Mode::Sshmt],
            supervision: Supervision::Cliques,
            jaccard_threshold: DEFAULT_JACCARD_THRESHOLD,
            smooth: 1,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.fractions.is_empty() {
            return bad("no supervision fractions".into());
        }
        if let Some(f) = self.fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return bad(format!("fraction {f} outside (0, 1]"));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.modes.is_empty() {
            return bad("no modes".into());
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("need at least one training and one test image".into());
        }
        self.train.validate()
    }
}

/// One image carried through superpixels, tree, features and full labels.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    pub conf: GridImage,
    pub gt: LabelMap,
    pub sp: LabelMap,
    pub tree: MergeTree,
    pub features: Array2<f64>,
    pub labels: LabelAssignment,
}

impl PreparedImage {
    pub fn new(conf: GridImage, gt: LabelMap, smooth: usize) -> Result<Self> {
        let sp = superpixels(&conf, smooth);
        let tree = build_merge_tree(&sp, &conf)?;
        let features = clique_features(&tree, &sp, &conf, None)?;
        let labels = labels_from_full_gt(&tree, &sp, &gt)?;
        Ok(PreparedImage {
            conf,
            gt,
            sp,
            tree,
            features,
            labels,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub mode: Mode,
    pub fraction: f64,
    pub repeat: usize,
    /// Mean adapted Rand error over the test images.
    pub are: f64,
    pub n_labelled: usize,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mode: Mode,
    pub fraction: f64,
    pub mean: f64,
    /// Population standard deviation over repeats.
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<Summary>,
}

impl ExperimentResult {
    pub fn summary(&self, mode: Mode, fraction: f64) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.mode == mode && s.fraction == fraction)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,fraction,repeat,are\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{:.6}", r.mode, r.fraction, r.repeat, r.are);
        }
        s.push_str("mode,fraction,mean,std\n");
        for m in &self.summaries {
            let _ = writeln!(s, "{},{},{:.6},{:.6}", m.mode, m.fraction, m.mean, m.std);
        }
        s
    }
}

/// Generate and prepare the training and test images.
pub fn prepare_images(cfg: &ExperimentConfig) -> Result<(Vec<PreparedImage>, Vec<PreparedImage>)> {
    let all: Vec<PreparedImage> = (0..cfg.n_train + cfg.n_test)
        .into_par_iter()
        .map(|k| {
            let p = SynthParams {
                seed: cfg.synth.seed.wrapping_add(k as u64),
                ..cfg.synth
            };
            let (conf, gt) = synth_volume(&p)?;
            PreparedImage::new(conf, gt, cfg.smooth)
        })
        .collect::<Result<_>>()?;
    let mut train = all;
    let test = train.split_off(cfg.n_train);
    Ok((train, test))
}

fn keep_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).clamp(1.min(n), n)
}

/// Per-image labels for one repeat. The units are shuffled once per repeat
/// and each fraction keeps a prefix, so smaller subsets nest in larger ones.
fn subsample(
    cfg: &ExperimentConfig,
    train: &[PreparedImage],
    repeat: usize,
    fraction: f64,
) -> Result<Vec<Option<LabelAssignment>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(repeat as u64));
    match cfg.supervision {
        Supervision::Cliques => {
            let mut units: Vec<(usize, usize)> = train
                .iter()
                .enumerate()
                .flat_map(|(k, img)| img.labels.supervised(&img.tree).map(move |(n, _)| (k, n)))
                .collect();
            units.shuffle(&mut rng);
            units.truncate(keep_count(units.len(), fraction));
            let mut keep: Vec<Vec<bool>> = train.iter().map(|img| vec![false; img.tree.len()]).collect();
            for (k, n) in units {
                keep[k][n] = true;
            }
            Ok(train
                .iter()
                .zip(keep)
                .map(|(img, keep)| {
                    let mut labels = img.labels.clone();
                    labels.retain(&img.tree, |n| keep[n]);
                    Some(labels)
                })
                .collect())
        }
        Supervision::Segments => {
            let segments: Vec<Vec<Vec<usize>>> =
                train.iter().map(|img| img.gt.segments().into_values().collect()).collect();
            let mut units: Vec<(usize, usize)> = segments
                .iter()
                .enumerate()
                .flat_map(|(k, s)| (0..s.len()).map(move |i| (k, i)))
                .collect();
            units.shuffle(&mut rng);
            units.truncate(keep_count(units.len(), fraction));
            let mut chosen = vec![Vec::new(); train.len()];
            for (k, i) in units {
                chosen[k].push(segments[k][i].clone());
            }
            train
                .iter()
                .zip(chosen)
                .map(|(img, segs)| {
                    if segs.is_empty() {
                        Ok(None)
                    } else {
                        labels_from_segments(&img.tree, &img.sp, &segs, cfg.jaccard_threshold).map(Some)
                    }
                })
                .collect()
        }
    }
}

/// Train one mode on the given labels and return the mean test error.
pub fn evaluate(
    cfg: &TrainConfig,
    mode: Mode,
    train: &[PreparedImage],
    labels: &[Option<LabelAssignment>],
    test: &[PreparedImage],
) -> Result<(f64, Vec<TraceRow>)> {
    let inputs: Vec<TrainInput<'_>> = train
        .iter()
        .zip(labels)
        .map(|(img, l)| TrainInput {
            tree: &img.tree,
            features: &img.features,
            labels: l.as_ref(),
        })
        .chain(test.iter().map(|img| TrainInput {
            tree: &img.tree,
            features: &img.features,
            labels: None,
        }))
        .collect();
    let (model, trained) = fit_model(&inputs, cfg, mode)?;
    let mut total = 0.0;
    for img in test {
        let seg = segment(&model, &img.tree, &img.features, &img.sp)?;
        total += adapted_rand_error(&seg, &img.gt, true)?.error;
    }
    Ok((total / test.len() as f64, trained.trace))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Run the sweep on already prepared images.
pub fn run_prepared(
    cfg: &ExperimentConfig,
    train: &[PreparedImage],
    test: &[PreparedImage],
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.fractions.len())
        .flat_map(|f| {
            (0..cfg.repeats).flat_map(move |r| (0..cfg.modes.len()).map(move |m| (f, r, m)))
        })
        .collect();
    let mut records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(f, r, m)| {
            let fraction = cfg.fractions[f];
            let labels = subsample(cfg, train, r, fraction)?;
            let n_labelled = train
                .iter()
                .zip(&labels)
                .map(|(img, l)| l.as_ref().map_or(0, |l| l.labelled_count(&img.tree)))
                .sum();
            let (are, trace) = evaluate(&cfg.train, cfg.modes[m], train, &labels, test)?;
            Ok(RunRecord {
                mode: cfg.modes[m],
                fraction,
                repeat: r,
                are,
                n_labelled,
                trace,
            })
        })
        .collect::<Result<_>>()?;
    let mode_rank = |m: Mode| cfg.modes.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    let frac_rank = |f: f64| cfg.fractions.iter().position(|&x| x == f).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (mode_rank(r.mode), frac_rank(r.fraction), r.repeat));
    let mut summaries = Vec::new();
    for &mode in &cfg.modes {
        for &fraction in &cfg.fractions {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.mode == mode && r.fraction == fraction)
                .map(|r| r.are)
                .collect();
            let (mean, std) = mean_std(&v);
            summaries.push(Summary {
                mode,
                fraction,
                mean,
                std,
            });
        }
    }
    Ok(ExperimentResult { records, summaries })
}

/// Generate images and run the sweep.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (train, test) = prepare_images(cfg)?;
    run_prepared(cfg, &train, &test)
}
