//! Stage glue shared by the command-line tool and the experiment runner.

use ndarray::{concatenate, Array2, Axis};

use crate::data::{Dims, Grid, GridData, GridImage, LabelMap};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, Standardizer, FEATURE_DIM};
use crate::inference::{greedy_label, node_potentials, segmentation_from_z};
use crate::labeling::LabelAssignment;
use crate::learner::{train, Mode, Model, TrainConfig, Trained, TrainingSet};
use crate::mergetree::{enumerate_paths, MergeTree};
use crate::watershed::watershed;

/// Watershed superpixels of `conf`, box-smoothed with `smooth` first when
/// non-zero.
pub fn superpixels(conf: &GridImage, smooth: usize) -> LabelMap {
    if smooth == 0 {
        watershed(conf)
    } else {
        watershed(&conf.box_smoothed(smooth))
    }
}

/// Clique features as they are stored on disk: single precision, one row per
/// non-leaf clique in node order.
pub fn clique_features(
    tree: &MergeTree,
    sp: &LabelMap,
    conf: &GridImage,
    raw: Option<&GridImage>,
) -> Result<Array2<f64>> {
    let x = FeatureExtractor::new(tree, sp, conf, raw)?.extract_all();
    Ok(x.mapv(|v| v as f32 as f64))
}

/// Feature matrix as an f32 grid: x runs over columns, y over rows.
pub fn features_to_grid(x: &Array2<f64>) -> Grid {
    let data = x.iter().map(|&v| v as f32).collect();
    Grid::new(Dims::new(x.ncols(), x.nrows(), 1), GridData::F32(data)).expect("row-major matrix")
}

pub fn features_from_grid(grid: Grid) -> Result<Array2<f64>> {
    let d = grid.dims;
    if d.nz != 1 {
        return Err(Error::DimsMismatch(format!("feature grid has nz = {}, expected 1", d.nz)));
    }
    let values = grid.into_image()?.into_values();
    Ok(Array2::from_shape_vec((d.ny, d.nx), values.into_iter().map(f64::from).collect())
        .expect("grid length checked"))
}

/// One image's contribution to training.
#[derive(Debug, Clone, Copy)]
pub struct TrainInput<'a> {
    pub tree: &'a MergeTree,
    pub features: &'a Array2<f64>,
    pub labels: Option<&'a LabelAssignment>,
}

fn check_rows(tree: &MergeTree, features: &Array2<f64>) -> Result<()> {
    let cliques = tree.len() - tree.n_leaves();
    if features.nrows() != cliques {
        return Err(Error::DimMismatch {
            expected: cliques,
            found: features.nrows(),
        });
    }
    if features.ncols() != FEATURE_DIM {
        return Err(Error::DimMismatch {
            expected: FEATURE_DIM,
            found: features.ncols(),
        });
    }
    Ok(())
}

/// Stack the inputs into one standardized training set. Every non-leaf
/// clique of every input is a sample; labelled ones are supervised.
pub fn assemble(inputs: &[TrainInput<'_>], path_len: usize) -> Result<(TrainingSet, Standardizer)> {
    let mut supervised = Vec::new();
    let mut paths = Vec::new();
    let mut offset = 0;
    for input in inputs {
        check_rows(input.tree, input.features)?;
        let first = input.tree.n_leaves();
        if let Some(labels) = input.labels {
            if labels.y.len() != input.tree.len() {
                return Err(Error::DimMismatch {
                    expected: input.tree.len(),
                    found: labels.y.len(),
                });
            }
            supervised.extend(
                labels
                    .supervised(input.tree)
                    .map(|(node, y)| (offset + node - first, y)),
            );
        }
        paths.extend(
            enumerate_paths(input.tree, path_len)
                .into_iter()
                .map(|p| p.0.into_iter().map(|n| offset + n - first).collect::<Vec<_>>()),
        );
        offset += input.features.nrows();
    }
    let views: Vec<_> = inputs.iter().map(|i| i.features.view()).collect();
    let x = if views.is_empty() {
        Array2::zeros((0, FEATURE_DIM))
    } else {
        concatenate(Axis(0), &views).expect("equal column counts")
    };
    let standardizer = Standardizer::fit(&x)?;
    let x = standardizer.apply(&x)?;
    Ok((TrainingSet::new(x, supervised, paths)?, standardizer))
}

/// Train a classifier on the inputs.
pub fn fit_model(inputs: &[TrainInput<'_>], cfg: &TrainConfig, mode: Mode) -> Result<(Model, Trained)> {
    if inputs.is_empty() {
        return Err(Error::EmptySamples);
    }
    let (data, standardizer) = assemble(inputs, cfg.path_len)?;
    let trained = train(cfg, &data, mode)?;
    Ok((Model::new(&trained, &standardizer), trained))
}

/// Predictions, potentials, greedy selection and painting for one image.
pub fn segment(model: &Model, tree: &MergeTree, features: &Array2<f64>, sp: &LabelMap) -> Result<LabelMap> {
    check_rows(tree, features)?;
    let mut probs = vec![None; tree.len()];
    for (node, p) in tree.internal_nodes().zip(model.predict_rows(features)?) {
        probs[node] = Some(p);
    }
    let u = node_potentials(tree, &probs)?;
    let z = greedy_label(tree, &u)?;
    segmentation_from_z(tree, &z, sp)
}
