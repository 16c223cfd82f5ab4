//! Per-clique shape and intensity features, plus feature standardization.

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BoundaryStats, GridImage, LabelMap};
use crate::error::{Error, Result};
use crate::mergetree::{MergeTree, RegionLayout};

pub const FEATURE_DIM: usize = 21;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "bias",
    "log_size",
    "log_size_c1",
    "log_size_c2",
    "size_ratio",
    "perimeter",
    "shared_boundary",
    "shared_boundary_ratio",
    "bbox_x",
    "bbox_y",
    "bbox_z",
    "boundary_conf_mean",
    "boundary_conf_std",
    "boundary_conf_min",
    "boundary_conf_max",
    "conf_mean_c1",
    "conf_mean_c2",
    "conf_mean_diff",
    "conf_mean",
    "conf_std",
    "boundary_raw_mean",
];

/// Feature row of one non-leaf clique. Component 0 is the bias term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Feature extraction for every clique of one tree over one image.
pub struct FeatureExtractor<'a> {
    tree: &'a MergeTree,
    conf: &'a GridImage,
    raw: Option<&'a GridImage>,
    layout: RegionLayout,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(
        tree: &'a MergeTree,
        sp: &LabelMap,
        conf: &'a GridImage,
        raw: Option<&'a GridImage>,
    ) -> Result<Self> {
        let dims = sp.dims();
        dims.check_same(&conf.dims(), "features: confidence map")?;
        if let Some(r) = raw {
            dims.check_same(&r.dims(), "features: raw image")?;
        }
        Ok(FeatureExtractor {
            tree,
            conf,
            raw,
            layout: RegionLayout::new(tree, sp)?,
        })
    }

    fn contains(&self, node: usize, voxel: usize) -> bool {
        self.layout.contains(node, voxel)
    }

    fn size(&self, node: usize) -> usize {
        self.layout.size(node)
    }

    pub fn extract(&self, node: usize) -> Result<FeatureVector> {
        let Some([a, b]) = self.tree.children(node) else {
            return Err(Error::LeafClique(node));
        };
        // larger child first, ties to the smaller id
        let (c1, c2) = match self.size(a).cmp(&self.size(b)) {
            std::cmp::Ordering::Less => (b, a),
            std::cmp::Ordering::Greater => (a, b),
            std::cmp::Ordering::Equal => (a.min(b), a.max(b)),
        };
        let dims = self.conf.dims();
        let region = self.layout.voxels(node);

        let mut perim = 0usize;
        let mut perim_child = [0usize; 2];
        let mut shared = 0usize;
        let mut boundary = BoundaryStats::default();
        let mut raw_boundary = BoundaryStats::default();
        let mut whole = BoundaryStats::default();
        let mut child_stats = [BoundaryStats::default(); 2];
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];

        for &v in region {
            let side = if self.contains(c1, v) { 0 } else { 1 };
            let cv = self.conf.get(v) as f64;
            whole.push(cv);
            child_stats[side].push(cv);
            let (x, y, z) = dims.coords(v);
            for (k, c) in [x, y, z].into_iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
            for w in dims.face_neighbors(v) {
                if !self.contains(node, w) {
                    perim += 1;
                    perim_child[side] += 1;
                } else if self.contains(c1, w) != (side == 0) {
                    perim_child[side] += 1;
                    if side == 0 {
                        shared += 1;
                        boundary.push(cv);
                        boundary.push(self.conf.get(w) as f64);
                        if let Some(r) = self.raw {
                            raw_boundary.push(r.get(v) as f64);
                            raw_boundary.push(r.get(w) as f64);
                        }
                    }
                }
            }
        }

        let n_i = region.len() as f64;
        let n_1 = self.size(c1) as f64;
        let n_2 = self.size(c2) as f64;
        let ext: Vec<f64> = (0..3).map(|k| (hi[k] - lo[k] + 1) as f64).collect();
        let max_ext = ext.iter().cloned().fold(1.0, f64::max);
        let bbox_z = if dims.is_planar() { 1.0 } else { ext[2] / max_ext };
        let min_child_perim = perim_child[0].min(perim_child[1]);
        let shared_ratio = if min_child_perim == 0 {
            0.0
        } else {
            shared as f64 / min_child_perim as f64
        };
        // children that never touch (forced merges) read as a certain boundary
        let (b_mean, b_std, b_min, b_max) = if boundary.count == 0 {
            (1.0, 0.0, 1.0, 1.0)
        } else {
            (boundary.mean(), boundary.std(), boundary.min, boundary.max)
        };
        let m1 = child_stats[0].mean();
        let m2 = child_stats[1].mean();

        let out = [
            1.0,
            n_i.ln(),
            n_1.ln(),
            n_2.ln(),
            n_2 / n_1,
            perim as f64,
            shared as f64,
            shared_ratio,
            ext[0] / max_ext,
            ext[1] / max_ext,
            bbox_z,
            b_mean,
            b_std,
            b_min,
            b_max,
            m1,
            m2,
            (m1 - m2).abs(),
            whole.mean(),
            whole.std(),
            raw_boundary.mean(),
        ];
        Ok(FeatureVector(out))
    }

    /// Feature rows of every non-leaf clique, in node id order.
    pub fn extract_all(&self) -> Array2<f64> {
        let rows: Vec<FeatureVector> = self
            .tree
            .internal_nodes()
            .into_par_iter()
            .map(|i| self.extract(i).expect("internal node"))
            .collect();
        let mut out = Array2::zeros((rows.len(), FEATURE_DIM));
        for (mut row, fv) in out.axis_iter_mut(Axis(0)).zip(&rows) {
            row.assign(&ArrayView1::from(&fv.0[..]));
        }
        out
    }
}

/// Features of a single non-leaf clique.
pub fn extract_features(
    tree: &MergeTree,
    clique: usize,
    sp: &LabelMap,
    conf: &GridImage,
    raw: Option<&GridImage>,
) -> Result<FeatureVector> {
    FeatureExtractor::new(tree, sp, conf, raw)?.extract(clique)
}

/// Per-column affine normalization. Column 0 (bias) passes through; columns
/// with a spread below `MIN_STD` are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub const MIN_STD: f64 = 1e-12;

    /// Fit on the rows of `x` using population statistics.
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::EmptySamples);
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            if j == 0 {
                means.push(0.0);
                stds.push(1.0);
                continue;
            }
            let m = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let s = var.sqrt();
            means.push(m);
            stds.push(if s < Self::MIN_STD { 1.0 } else { s });
        }
        Ok(Standardizer { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply_row(&self, mut row: ArrayViewMut1<f64>) {
        for (j, v) in row.iter_mut().enumerate().skip(1) {
            *v = (*v - self.means[j]) / self.stds[j];
        }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        let mut out = x.clone();
        for row in out.axis_iter_mut(Axis(0)) {
            self.apply_row(row);
        }
        Ok(out)
    }

    pub fn invert_row(&self, mut row: ArrayViewMut1<f64>) {
        for (j, v) in row.iter_mut().enumerate().skip(1) {
            *v = *v * self.stds[j] + self.means[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dims;
    use crate::mergetree::build_merge_tree;
    use ndarray::array;

    fn two_halves() -> (MergeTree, LabelMap, GridImage) {
        // columns x=0 and x=1 of a 2x2 image
        let sp = LabelMap::new(Dims::planar(2, 2), vec![1, 2, 1, 2]).unwrap();
        let conf = GridImage::filled(sp.dims(), 0.5);
        let tree = build_merge_tree(&sp, &conf).unwrap();
        (tree, sp, conf)
    }

    #[test]
    fn two_by_two_example() {
        let (tree, sp, conf) = two_halves();
        let f = extract_features(&tree, 2, &sp, &conf, None).unwrap().0;
        assert_eq!(f[0], 1.0);
        assert!((f[1] - 4f64.ln()).abs() < 1e-12);
        assert!((f[2] - 2f64.ln()).abs() < 1e-12);
        assert!((f[3] - 2f64.ln()).abs() < 1e-12);
        assert_eq!(f[4], 1.0);
        assert_eq!(f[5], 0.0); // no faces leave the image-wide region
        assert_eq!(f[6], 2.0);
        assert_eq!(f[7], 1.0); // each child's perimeter is the shared boundary
        assert_eq!(&f[8..11], &[1.0, 1.0, 1.0]);
        assert_eq!(&f[11..15], &[0.5, 0.0, 0.5, 0.5]);
        assert_eq!(f[17], 0.0);
        assert_eq!(f[20], 0.0);
    }

    #[test]
    fn single_voxel_children() {
        let sp = LabelMap::new(
            Dims::planar(4, 3),
            vec![3, 3, 3, 3, 3, 1, 2, 3, 3, 3, 3, 3],
        )
        .unwrap();
        let mut conf = GridImage::filled(sp.dims(), 0.9);
        conf.values_mut()[5] = 0.1;
        conf.values_mut()[6] = 0.2;
        let tree = build_merge_tree(&sp, &conf).unwrap();
        // first merge joins the two single voxels
        assert_eq!(tree.children(3), Some([0, 1]));
        let f = extract_features(&tree, 3, &sp, &conf, None).unwrap().0;
        assert_eq!(f[4], 1.0);
        assert_eq!(f[5], 6.0); // pair of voxels has 6 outer faces
        assert_eq!(f[6], 1.0);
        assert_eq!(f[7], 0.25); // each voxel has 4 faces
        assert!((f[15] - 0.1).abs() < 1e-6);
        assert!((f[16] - 0.2).abs() < 1e-6);
        assert!((f[17] - 0.1).abs() < 1e-6);
        assert!((f[8] - 1.0).abs() < 1e-12 && (f[9] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn leaf_clique_rejected() {
        let (tree, sp, conf) = two_halves();
        assert!(matches!(
            extract_features(&tree, 0, &sp, &conf, None),
            Err(Error::LeafClique(0))
        ));
    }

    #[test]
    fn swapped_children_same_vector() {
        let sp = LabelMap::new(Dims::planar(3, 2), vec![1, 1, 2, 1, 2, 2]).unwrap();
        let conf = GridImage::new(sp.dims(), vec![0.1, 0.4, 0.7, 0.2, 0.6, 0.3]).unwrap();
        let t1 = MergeTree::from_merges(&[1, 2], &[[0, 1]]).unwrap();
        let t2 = MergeTree::from_merges(&[1, 2], &[[1, 0]]).unwrap();
        let a = extract_features(&t1, 2, &sp, &conf, Some(&conf)).unwrap();
        let b = extract_features(&t2, 2, &sp, &conf, Some(&conf)).unwrap();
        assert_eq!(a, b);
        assert!(a.0.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn standardizer_examples() {
        let x = array![[1.0, 1.0, 5.0], [1.0, 3.0, 5.0]];
        let st = Standardizer::fit(&x).unwrap();
        let z = st.apply(&x).unwrap();
        assert_eq!(z, array![[1.0, -1.0, 0.0], [1.0, 1.0, 0.0]]);

        let single = array![[1.0, 4.0, -2.0]];
        let st = Standardizer::fit(&single).unwrap();
        assert!(st.stds.iter().all(|&s| s >= Standardizer::MIN_STD));
        assert_eq!(st.apply(&single).unwrap(), array![[1.0, 0.0, 0.0]]);

        assert!(matches!(
            Standardizer::fit(&Array2::zeros((0, 3))),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn standardizer_inverts() {
        let x = array![[1.0, 2.0, -1.0], [1.0, 7.0, 3.5], [1.0, -4.0, 0.25]];
        let st = Standardizer::fit(&x).unwrap();
        let mut z = st.apply(&x).unwrap();
        for row in z.axis_iter_mut(Axis(0)) {
            st.invert_row(row);
        }
        for (a, b) in z.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
