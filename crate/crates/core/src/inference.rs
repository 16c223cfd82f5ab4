//! Greedy selection of tree nodes into a final segmentation.

use crate::data::LabelMap;
use crate::error::{Error, Result};
use crate::mergetree::{check_region_consistency, MergeTree, RegionLayout};

/// Node potentials `u_i = P(merge at i) · P(split at parent(i))`.
///
/// `merge_prob` is indexed by node id; leaf entries are ignored (a leaf is
/// always merged) and the root's missing parent counts as a certain split.
pub fn node_potentials(tree: &MergeTree, merge_prob: &[Option<f64>]) -> Result<Vec<f64>> {
    let mut p = vec![1.0; tree.len()];
    for i in tree.internal_nodes() {
        p[i] = merge_prob
            .get(i)
            .copied()
            .flatten()
            .ok_or(Error::MissingPrediction(i))?;
    }
    Ok((0..tree.len())
        .map(|i| p[i] * tree.parent(i).map_or(1.0, |q| 1.0 - p[q]))
        .collect())
}

/// Repeatedly select the unlabelled node with the highest potential (ties to
/// the smaller id) and exclude its ancestors and descendants.
pub fn greedy_label(tree: &MergeTree, u: &[f64]) -> Result<Vec<bool>> {
    if u.len() != tree.len() {
        return Err(Error::DimMismatch {
            expected: tree.len(),
            found: u.len(),
        });
    }
    let mut order: Vec<usize> = (0..tree.len()).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
    let mut decided = vec![false; tree.len()];
    let mut z = vec![false; tree.len()];
    for i in order {
        if decided[i] {
            continue;
        }
        z[i] = true;
        for v in tree.subtree(i) {
            decided[v] = true;
        }
        for a in tree.ancestors(i) {
            decided[a] = true;
        }
    }
    Ok(z)
}

/// Paint each selected node's region with its own label, `1..=K` in node
/// order.
pub fn segmentation_from_z(tree: &MergeTree, z: &[bool], sp: &LabelMap) -> Result<LabelMap> {
    check_region_consistency(tree, z)?;
    let layout = RegionLayout::new(tree, sp)?;
    let mut out = vec![0u32; sp.labels().len()];
    let mut next = 0u32;
    for i in (0..tree.len()).filter(|&i| z[i]) {
        next += 1;
        for &v in layout.voxels(i) {
            out[v] = next;
        }
    }
    LabelMap::new(sp.dims(), out)
}
