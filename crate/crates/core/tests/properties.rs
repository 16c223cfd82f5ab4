use std::collections::{BTreeMap, HashSet};

use ndarray::Array2;
use proptest::prelude::*;

use sshmt::data::{region_adjacency, synth_volume, Dims, LabelMap, SynthParams};
use sshmt::features::{FeatureExtractor, Standardizer};
use sshmt::learner::{objective, predict, Sigmas, TrainingSet, EPS};
use sshmt::mergetree::{
    build_agglomeration, build_merge_tree, check_partial_merge_consistency, enumerate_paths, MergeTree,
};
use sshmt::labeling::{labels_from_full_gt, labels_from_segments, select_segment_nodes};
use sshmt::metrics::adapted_rand_error;
use sshmt::pipeline::superpixels;

fn arb_pair() -> impl Strategy<Value = (Vec<u32>, Vec<u32>, Vec<u32>)> {
    (1usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(1u32..6, n),
            prop::collection::vec(0u32..5, n),
            Just((1u32..=8).rev().collect::<Vec<_>>()),
        )
    })
}

fn line(v: Vec<u32>) -> LabelMap {
    LabelMap::new(Dims::planar(v.len(), 1), v).unwrap()
}

proptest! {
    #[test]
    fn rand_error_relabel_and_swap((s, t, perm) in arb_pair()) {
        let base = adapted_rand_error(&line(s.clone()), &line(t.clone()), false).unwrap();
        let s2: Vec<u32> = s.iter().map(|&l| perm[l as usize - 1]).collect();
        let t2: Vec<u32> = t.iter().map(|&l| 100 + l).collect();
        let moved = adapted_rand_error(&line(s2), &line(t2), false).unwrap();
        prop_assert_eq!(base, moved);
        let swapped = adapted_rand_error(&line(t), &line(s), false).unwrap();
        prop_assert_eq!(swapped.precision, base.recall);
        prop_assert_eq!(swapped.recall, base.precision);
        prop_assert!((swapped.error - base.error).abs() < 1e-15);
    }

    #[test]
    fn predictions_stay_clamped(w in prop::collection::vec(-1e3f64..1e3, 1..8), seed in any::<u64>()) {
        let x: Vec<f64> = (0..w.len()).map(|k| ((seed >> (k % 60)) & 0xff) as f64 - 128.0).collect();
        let f = predict(&w, &x).unwrap();
        prop_assert!((EPS..=1.0 - EPS).contains(&f));
        let rows = Array2::from_shape_vec((1, w.len()), x).unwrap();
        let data = TrainingSet::new(rows, vec![(0, seed % 2 == 0)], vec![vec![0, 0, 0]]).unwrap();
        let tight = Sigmas { u: 1e-6, s: 1e-6 };
        prop_assert!(objective(&w, tight, &data).is_finite());
    }

    #[test]
    fn standardizer_inverts(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 4), 1..20)) {
        let n = rows.len();
        let x = Array2::from_shape_vec((n, 4), rows.concat()).unwrap();
        let st = Standardizer::fit(&x).unwrap();
        let mut y = st.apply(&x).unwrap();
        for mut r in y.rows_mut() {
            st.invert_row(r.view_mut());
        }
        for (a, b) in x.iter().zip(y.iter()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}

struct Scene {
    sp: LabelMap,
    gt: LabelMap,
    tree: MergeTree,
    conf: sshmt::data::GridImage,
}

fn scene(seed: u64, cells: usize, noise: f64) -> Scene {
    let p = SynthParams {
        dims: [28, 28, 1],
        n_cells: cells,
        noise_std: noise,
        seed,
        ..SynthParams::default()
    };
    let (conf, gt) = synth_volume(&p).unwrap();
    let sp = superpixels(&conf, 1);
    let tree = build_merge_tree(&sp, &conf).unwrap();
    Scene { sp, gt, tree, conf }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_shape(seed in 0u64..1000, cells in 1usize..8) {
        let s = scene(seed, cells, 0.15);
        let labels = s.sp.distinct();
        prop_assert_eq!(s.tree.n_leaves(), labels.len());
        prop_assert_eq!(s.tree.len(), 2 * labels.len() - 1);
        let leaf_labels: HashSet<u32> = (0..s.tree.n_leaves()).map(|l| s.tree.node(l).leaf_label.unwrap()).collect();
        prop_assert_eq!(leaf_labels, labels.into_iter().collect::<HashSet<_>>());
        let paths = enumerate_paths(&s.tree, 3);
        prop_assert_eq!(paths.len(), s.tree.len() - s.tree.n_leaves());
        for p in &paths {
            for w in p.cliques().windows(2) {
                prop_assert_eq!(s.tree.parent(w[0]), Some(w[1]));
            }
        }
    }

    #[test]
    fn generated_labels_are_consistent(seed in 0u64..1000, cells in 2usize..8, noise in 0.0f64..0.3) {
        let s = scene(seed, cells, noise);
        let full = labels_from_full_gt(&s.tree, &s.sp, &s.gt).unwrap();
        prop_assert!(check_partial_merge_consistency(&s.tree, &full.y));
        let segments: Vec<Vec<usize>> = s.gt.segments().into_values().collect();
        let part = labels_from_segments(&s.tree, &s.sp, &segments, 0.75).unwrap();
        prop_assert!(check_partial_merge_consistency(&s.tree, &part.y));
        let sel = select_segment_nodes(&s.tree, &s.sp, &segments, 0.75).unwrap();
        for &a in &sel {
            for &b in &sel {
                prop_assert!(a == b || !s.tree.is_ancestor(a, b));
            }
        }
    }

    #[test]
    fn features_ignore_superpixel_numbering(seed in 0u64..1000, cells in 2usize..8) {
        let s = scene(seed, cells, 0.1);
        // equal saliencies are broken by node id, which does depend on numbering
        let distinct = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.windows(2).all(|w| w[0] != w[1])
        };
        let adj = region_adjacency(&s.sp, &s.conf).unwrap();
        prop_assume!(distinct(adj.iter().map(|(_, b)| b.stats.mean()).collect()));
        prop_assume!(distinct(build_agglomeration(&s.sp, &s.conf).unwrap().saliency));
        let k = s.sp.distinct().len() as u32;
        // reverse the label order, which reverses leaf ids
        let flipped = LabelMap::new(s.sp.dims(), s.sp.labels().iter().map(|&l| k + 1 - l).collect()).unwrap();
        let tree2 = build_merge_tree(&flipped, &s.conf).unwrap();
        let a = FeatureExtractor::new(&s.tree, &s.sp, &s.conf, None).unwrap().extract_all();
        let b = FeatureExtractor::new(&tree2, &flipped, &s.conf, None).unwrap().extract_all();
        let key = |x: &Array2<f64>| -> BTreeMap<Vec<i64>, usize> {
            let mut m = BTreeMap::new();
            for r in x.rows() {
                let mut k: Vec<i64> = r.iter().map(|v| (v * 1e6).round() as i64).collect();
                // equal-size children are ordered by node id
                if k[2] == k[3] && k[15] > k[16] {
                    k.swap(15, 16);
                }
                *m.entry(k).or_default() += 1;
            }
            m
        };
        prop_assert_eq!(key(&a), key(&b));
    }
}
