//! Connected components and the region adjacency graph.

use std::collections::{BTreeMap, VecDeque};

use super::grid::{GridImage, LabelMap};
use crate::error::{Error, Result};

/// Relabel `map` so that every maximal face-connected run of one input label
/// gets its own label. Output labels are `1..=K` in scan order of each
/// component's first voxel; voxels labelled 0 stay 0.
pub fn connected_components(map: &LabelMap) -> LabelMap {
    let dims = map.dims();
    let src = map.labels();
    let mut out = vec![0u32; src.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..src.len() {
        if src[start] == 0 || out[start] != 0 {
            continue;
        }
        next += 1;
        let label = src[start];
        out[start] = next;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for w in dims.face_neighbors(v) {
                if out[w] == 0 && src[w] == label {
                    out[w] = next;
                    queue.push_back(w);
                }
            }
        }
    }
    LabelMap::new(dims, out).expect("same dims")
}

/// Running statistics over a multiset of confidence values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryStats {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for BoundaryStats {
    fn default() -> Self {
        BoundaryStats {
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl BoundaryStats {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn merge(&mut self, other: &BoundaryStats) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let m = self.mean();
        (self.sum_sq / self.count as f64 - m * m).max(0.0).sqrt()
    }
}

/// Crossing faces between two regions and the statistics of the confidence
/// values at both endpoints of every face.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Boundary {
    pub faces: Vec<(usize, usize)>,
    pub stats: BoundaryStats,
}

/// Region adjacency keyed by `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionAdjacency {
    pairs: BTreeMap<(u32, u32), Boundary>,
}

impl RegionAdjacency {
    pub fn get(&self, a: u32, b: u32) -> Option<&Boundary> {
        self.pairs.get(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &Boundary)> {
        self.pairs.iter()
    }

    /// Total number of crossing faces over all pairs.
    pub fn face_count(&self) -> usize {
        self.pairs.values().map(|b| b.faces.len()).sum()
    }
}

pub fn region_adjacency(map: &LabelMap, conf: &GridImage) -> Result<RegionAdjacency> {
    let dims = map.dims();
    dims.check_same(&conf.dims(), "region_adjacency")?;
    if map.has_zero() {
        return Err(Error::InvalidParameter(
            "superpixel map contains label 0".into(),
        ));
    }
    let labels = map.labels();
    let mut pairs: BTreeMap<(u32, u32), Boundary> = BTreeMap::new();
    for v in 0..labels.len() {
        let a = labels[v];
        for w in dims.forward_neighbors(v) {
            let b = labels[w];
            if a == b {
                continue;
            }
            let entry = pairs.entry((a.min(b), a.max(b))).or_default();
            entry.faces.push((v, w));
            entry.stats.push(conf.get(v) as f64);
            entry.stats.push(conf.get(w) as f64);
        }
    }
    Ok(RegionAdjacency { pairs })
}
