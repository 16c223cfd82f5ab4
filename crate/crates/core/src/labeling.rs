//! Training labels for merge cliques.
//!
//! Two sources: a full ground-truth label map, where each clique takes the
//! merge/split outcome with the lower adapted Rand error inside its region;
//! and a set of individually annotated segments, where tree nodes are
//! matched to segments by Jaccard index and only cliques on or around the
//! matched nodes receive labels.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::LabelMap;
use crate::error::{Error, Result};
use crate::mergetree::{MergeTree, RegionLayout};
use crate::metrics::ContingencyTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    FullGt,
    PerSegment,
    LeafFixed,
}

/// Per-clique merge labels (`Some(true)` = merge), indexed by node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    pub y: Vec<Option<bool>>,
    pub provenance: Vec<Option<Provenance>>,
}

impl LabelAssignment {
    /// Only leaf cliques labelled.
    pub fn leaves_only(tree: &MergeTree) -> Self {
        let mut y = vec![None; tree.len()];
        let mut provenance = vec![None; tree.len()];
        for l in 0..tree.n_leaves() {
            y[l] = Some(true);
            provenance[l] = Some(Provenance::LeafFixed);
        }
        LabelAssignment { y, provenance }
    }

    fn set(&mut self, node: usize, label: bool, source: Provenance) {
        if self.provenance[node] == Some(Provenance::LeafFixed) {
            return;
        }
        self.y[node] = Some(label);
        self.provenance[node] = Some(source);
    }

    /// Labelled non-leaf cliques as `(node, y)`, in node order.
    pub fn supervised<'a>(&'a self, tree: &'a MergeTree) -> impl Iterator<Item = (usize, bool)> + 'a {
        tree.internal_nodes()
            .filter_map(move |i| self.y[i].map(|y| (i, y)))
    }

    pub fn labelled_count(&self, tree: &MergeTree) -> usize {
        self.supervised(tree).count()
    }

    /// Keep only the non-leaf labels whose node passes `keep`.
    pub fn retain(&mut self, tree: &MergeTree, mut keep: impl FnMut(usize) -> bool) {
        for i in tree.internal_nodes() {
            if self.y[i].is_some() && !keep(i) {
                self.y[i] = None;
                self.provenance[i] = None;
            }
        }
    }

    /// JSON object `{clique_id: 0|1}` over the labelled non-leaf cliques.
    pub fn to_json(&self, tree: &MergeTree) -> Result<String> {
        let map: BTreeMap<usize, u8> = self.supervised(tree).map(|(i, y)| (i, y as u8)).collect();
        Ok(serde_json::to_string(&map)?)
    }

    pub fn from_json(tree: &MergeTree, s: &str) -> Result<Self> {
        let map: BTreeMap<usize, u8> = serde_json::from_str(s)?;
        let mut out = Self::leaves_only(tree);
        for (node, y) in map {
            if node >= tree.len() {
                return Err(Error::InvalidParameter(format!(
                    "label for clique {node} outside a tree of {} nodes",
                    tree.len()
                )));
            }
            if y > 1 {
                return Err(Error::InvalidParameter(format!(
                    "label {y} for clique {node} is not 0 or 1"
                )));
            }
            if tree.is_leaf(node) && y == 0 {
                return Err(Error::InconsistentY { node });
            }
            out.set(node, y == 1, Provenance::FullGt);
        }
        Ok(out)
    }
}

/// Label every non-leaf clique from a full ground-truth map (0 = ignore).
///
/// A clique merges only if merging does not raise the error within its
/// region and neither child clique splits.
pub fn labels_from_full_gt(tree: &MergeTree, sp: &LabelMap, gt: &LabelMap) -> Result<LabelAssignment> {
    sp.dims().check_same(&gt.dims(), "labels_from_full_gt")?;
    let layout = RegionLayout::new(tree, sp)?;
    let mut out = LabelAssignment::leaves_only(tree);
    for i in tree.internal_nodes() {
        let [c1, c2] = tree.children(i).expect("internal node");
        if out.y[c1] == Some(false) || out.y[c2] == Some(false) {
            out.set(i, false, Provenance::FullGt);
            continue;
        }
        let counted = || {
            layout
                .voxels(i)
                .iter()
                .map(|&v| (v, gt.get(v)))
                .filter(|&(_, g)| g != 0)
        };
        let merge = ContingencyTable::from_pairs(counted().map(|(_, g)| (0, g)));
        let merged = if merge.total() == 0 {
            true
        } else {
            let split = ContingencyTable::from_pairs(
                counted().map(|(v, g)| (layout.contains(c1, v) as u32, g)),
            );
            merge.scores().error <= split.scores().error
        };
        out.set(i, merged, Provenance::FullGt);
    }
    Ok(out)
}

/// Nodes matched to annotated segments: repeatedly take the eligible node
/// with the highest best-Jaccard score (ties to the larger id) and retire its
/// ancestors and descendants.
pub fn select_segment_nodes(
    tree: &MergeTree,
    sp: &LabelMap,
    segments: &[Vec<usize>],
    threshold: f64,
) -> Result<Vec<usize>> {
    if segments.is_empty() {
        return Err(Error::EmptySegments);
    }
    let n_vox = sp.labels().len();
    let layout = RegionLayout::new(tree, sp)?;
    let mut score = vec![0.0f64; tree.len()];
    let mut inter = vec![0usize; tree.len()];
    for seg in segments {
        let set: HashSet<usize> = seg.iter().copied().collect();
        if let Some(&bad) = set.iter().find(|&&v| v >= n_vox) {
            return Err(Error::InvalidParameter(format!(
                "segment voxel {bad} outside a grid of {n_vox} voxels"
            )));
        }
        inter.iter_mut().for_each(|c| *c = 0);
        for &v in &set {
            let leaf = tree.leaf_for_label(sp.get(v)).ok_or(Error::UnknownLabel(sp.get(v)))?;
            inter[leaf] += 1;
        }
        for i in tree.internal_nodes() {
            let [a, b] = tree.children(i).expect("internal node");
            inter[i] = inter[a] + inter[b];
        }
        for (node, s) in score.iter_mut().enumerate() {
            let union = layout.size(node) + set.len() - inter[node];
            let j = if union == 0 { 1.0 } else { inter[node] as f64 / union as f64 };
            *s = s.max(j);
        }
    }
    let mut candidates: Vec<usize> = (0..tree.len()).filter(|&i| score[i] >= threshold).collect();
    candidates.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(b.cmp(&a)));
    let mut retired = vec![false; tree.len()];
    let mut selected = Vec::new();
    for c in candidates {
        if retired[c] {
            continue;
        }
        selected.push(c);
        for v in tree.subtree(c) {
            retired[v] = true;
        }
        for a in tree.ancestors(c) {
            retired[a] = true;
        }
    }
    Ok(selected)
}

/// Labels from individually annotated segments (voxel index lists).
/// Selected nodes and their descendants get `y = 1`, their ancestors `y = 0`;
/// everything else stays unlabelled.
pub fn labels_from_segments(
    tree: &MergeTree,
    sp: &LabelMap,
    segments: &[Vec<usize>],
    threshold: f64,
) -> Result<LabelAssignment> {
    let selected = select_segment_nodes(tree, sp, segments, threshold)?;
    let mut out = LabelAssignment::leaves_only(tree);
    for &s in &selected {
        for v in tree.subtree(s) {
            out.set(v, true, Provenance::PerSegment);
        }
        for a in tree.ancestors(s) {
            out.set(a, false, Provenance::PerSegment);
        }
    }
    Ok(out)
}

pub const DEFAULT_JACCARD_THRESHOLD: f64 = 0.75;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dims;
    use crate::mergetree::{check_partial_merge_consistency, z_to_y};

    /// 1D strip of four voxels, superpixels 1..=4; a=(1,2) -> node 4,
    /// b=(3,4) -> node 5, root 6.
    fn strip() -> (MergeTree, LabelMap) {
        let sp = LabelMap::new(Dims::planar(4, 1), vec![1, 2, 3, 4]).unwrap();
        let tree = MergeTree::from_merges(&[1, 2, 3, 4], &[[0, 1], [2, 3], [4, 5]]).unwrap();
        (tree, sp)
    }

    #[test]
    fn full_gt_split_beats_merge() {
        let (tree, sp) = strip();
        let gt = LabelMap::new(sp.dims(), vec![1, 1, 2, 2]).unwrap();
        let lab = labels_from_full_gt(&tree, &sp, &gt).unwrap();
        assert_eq!(lab.y[6], Some(false));
        assert_eq!(lab.y[4], Some(true));
        assert_eq!(lab.y[5], Some(true));
        assert!(lab.y[..4].iter().all(|&y| y == Some(true)));
    }

    #[test]
    fn full_gt_homogeneous_merges() {
        let (tree, sp) = strip();
        let gt = LabelMap::filled(sp.dims(), 3);
        let lab = labels_from_full_gt(&tree, &sp, &gt).unwrap();
        assert!(lab.y.iter().all(|&y| y == Some(true)));
    }

    #[test]
    fn full_gt_unannotated_region_merges() {
        let (tree, sp) = strip();
        let gt = LabelMap::new(sp.dims(), vec![0, 0, 1, 2]).unwrap();
        let lab = labels_from_full_gt(&tree, &sp, &gt).unwrap();
        assert_eq!(lab.y[4], Some(true));
        assert_eq!(lab.y[5], Some(false));
    }

    #[test]
    fn split_below_forces_split_above() {
        // c = (a, b) straddles two objects; p = (c, d) alone would prefer merging
        let mut labels = vec![1];
        labels.extend([2; 10]);
        labels.extend([3; 10]);
        let sp = LabelMap::new(Dims::planar(21, 1), labels).unwrap();
        let tree = MergeTree::from_merges(&[1, 2, 3], &[[0, 1], [3, 2]]).unwrap();
        let mut g = vec![1];
        g.extend([2; 20]);
        let gt = LabelMap::new(sp.dims(), g).unwrap();
        let lab = labels_from_full_gt(&tree, &sp, &gt).unwrap();
        assert_eq!(lab.y[3], Some(false));
        assert_eq!(lab.y[4], Some(false));
        assert!(check_partial_merge_consistency(&tree, &lab.y));
    }

    #[test]
    fn full_gt_dims_mismatch() {
        let (tree, sp) = strip();
        let gt = LabelMap::filled(Dims::planar(5, 1), 1);
        assert!(matches!(
            labels_from_full_gt(&tree, &sp, &gt),
            Err(Error::DimsMismatch(_))
        ));
    }

    #[test]
    fn full_gt_matches_z_to_y_on_exact_segmentation() {
        let (tree, sp) = strip();
        // gt segments are exactly nodes 4 and 5
        let gt = LabelMap::new(sp.dims(), vec![7, 7, 9, 9]).unwrap();
        let lab = labels_from_full_gt(&tree, &sp, &gt).unwrap();
        let mut z = vec![false; 7];
        z[4] = true;
        z[5] = true;
        let y = z_to_y(&tree, &z).unwrap();
        assert_eq!(lab.y, y.into_iter().map(Some).collect::<Vec<_>>());
    }

    #[test]
    fn segment_matching_one_node() {
        let sp = LabelMap::new(Dims::planar(2, 1), vec![1, 2]).unwrap();
        let tree = MergeTree::from_merges(&[1, 2], &[[0, 1]]).unwrap();
        let lab = labels_from_segments(&tree, &sp, &[vec![0, 1]], 0.75).unwrap();
        assert_eq!(lab.y, vec![Some(true); 3]);
        assert_eq!(lab.provenance[2], Some(Provenance::PerSegment));
    }

    #[test]
    fn below_threshold_contributes_nothing() {
        let sp = LabelMap::new(Dims::planar(5, 1), vec![1, 2, 3, 4, 4]).unwrap();
        let tree = MergeTree::from_merges(&[1, 2, 3, 4], &[[0, 1], [2, 3], [4, 5]]).unwrap();
        // best Jaccard is 3/5 = 0.6, for the root
        let segment = vec![0, 2, 4];
        let sel = select_segment_nodes(&tree, &sp, std::slice::from_ref(&segment), 0.75).unwrap();
        assert!(sel.is_empty());
        let lab = labels_from_segments(&tree, &sp, &[segment], 0.75).unwrap();
        assert_eq!(lab.labelled_count(&tree), 0);
    }

    #[test]
    fn sibling_segments_split_their_ancestor() {
        let (tree, sp) = strip();
        let lab = labels_from_segments(&tree, &sp, &[vec![0, 1], vec![2, 3]], 0.75).unwrap();
        assert_eq!(
            select_segment_nodes(&tree, &sp, &[vec![0, 1], vec![2, 3]], 0.75).unwrap(),
            vec![5, 4]
        );
        assert_eq!(lab.y[4], Some(true));
        assert_eq!(lab.y[5], Some(true));
        assert_eq!(lab.y[6], Some(false));
        assert!(check_partial_merge_consistency(&tree, &lab.y));
    }

    #[test]
    fn partial_segment_leaves_rest_unlabelled() {
        let (tree, sp) = strip();
        let lab = labels_from_segments(&tree, &sp, &[vec![2, 3]], 0.75).unwrap();
        assert_eq!(lab.y[4], None);
        assert_eq!(lab.y[5], Some(true));
        assert_eq!(lab.y[6], Some(false));
    }

    #[test]
    fn empty_segments_rejected() {
        let (tree, sp) = strip();
        assert!(matches!(
            labels_from_segments(&tree, &sp, &[], 0.75),
            Err(Error::EmptySegments)
        ));
    }

    #[test]
    fn json_roundtrip() {
        let (tree, sp) = strip();
        let lab = labels_from_segments(&tree, &sp, &[vec![2, 3]], 0.75).unwrap();
        let s = lab.to_json(&tree).unwrap();
        assert_eq!(s, r#"{"5":1,"6":0}"#);
        let back = LabelAssignment::from_json(&tree, &s).unwrap();
        assert_eq!(back.y, lab.y);
    }
}
