//! Priority-flood watershed without watershed lines.
//!
//! Regional minima are plateau-merged and labelled `1..=K` in scan order of
//! their first voxel. Flooding pops voxels in ascending confidence; equal
//! values are served first-in first-out.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::data::{GridImage, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    level: f32,
    order: u64,
    voxel: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (level, order, voxel)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .level
            .total_cmp(&self.level)
            .then(other.order.cmp(&self.order))
            .then(other.voxel.cmp(&self.voxel))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Label every plateau-merged regional minimum of `conf`.
pub fn regional_minima(conf: &GridImage) -> LabelMap {
    let dims = conf.dims();
    let vals = conf.values();
    let n = vals.len();
    let mut out = vec![0u32; n];
    let mut seen = vec![false; n];
    let mut next = 0u32;
    let mut plateau = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let level = vals[start];
        let mut is_min = true;
        plateau.clear();
        seen[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            plateau.push(v);
            for w in dims.face_neighbors(v) {
                if vals[w] < level {
                    is_min = false;
                } else if vals[w] == level && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if is_min {
            next += 1;
            for &v in &plateau {
                out[v] = next;
            }
        }
    }
    LabelMap::new(dims, out).expect("same dims")
}

/// Over-segment `conf` into basins labelled `1..=K`, one per regional minimum.
pub fn watershed(conf: &GridImage) -> LabelMap {
    let dims = conf.dims();
    let vals = conf.values();
    let mut labels = regional_minima(conf).into_labels();
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    for (v, &l) in labels.iter().enumerate() {
        if l != 0 {
            heap.push(Entry {
                level: vals[v],
                order,
                voxel: v,
            });
            order += 1;
        }
    }
    while let Some(Entry { voxel, .. }) = heap.pop() {
        let label = labels[voxel];
        for w in dims.face_neighbors(voxel) {
            if labels[w] == 0 {
                labels[w] = label;
                heap.push(Entry {
                    level: vals[w],
                    order,
                    voxel: w,
                });
                order += 1;
            }
        }
    }
    LabelMap::new(dims, labels).expect("same dims")
}
