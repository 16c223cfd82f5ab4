//! Adapted Rand error and Jaccard index.

use std::collections::{HashMap, HashSet};

use crate::data::LabelMap;
use crate::error::Result;

/// Pairwise co-clustering scores of a segmentation against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandScores {
    pub error: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Normalised overlap counts between a segmentation (rows) and ground truth
/// (columns).
#[derive(Debug, Clone, Default)]
pub struct ContingencyTable {
    total: u64,
    cells: HashMap<(u32, u32), u64>,
    rows: HashMap<u32, u64>,
    cols: HashMap<u32, u64>,
}

impl ContingencyTable {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut t = ContingencyTable::default();
        for (s, g) in pairs {
            t.total += 1;
            *t.cells.entry((s, g)).or_default() += 1;
            *t.rows.entry(s).or_default() += 1;
            *t.cols.entry(g).or_default() += 1;
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn scores(&self) -> RandScores {
        // sums of squared counts; exact in u128 before the final division
        let sum_p = sum_sq(self.cells.values());
        let sum_s = sum_sq(self.rows.values());
        let sum_t = sum_sq(self.cols.values());
        if sum_s == 0 || sum_t == 0 {
            let both_empty = sum_s == 0 && sum_t == 0;
            return RandScores {
                error: if both_empty { 0.0 } else { 1.0 },
                precision: 0.0,
                recall: 0.0,
            };
        }
        let precision = sum_p as f64 / sum_s as f64;
        let recall = sum_p as f64 / sum_t as f64;
        // 1 - 2PR/(P+R) == (sum_s + sum_t - 2 sum_p) / (sum_s + sum_t), a ratio of
        // integers so the only rounding is the final division
        let error = (sum_s + sum_t - 2 * sum_p) as f64 / (sum_s + sum_t) as f64;
        RandScores {
            error,
            precision,
            recall,
        }
    }
}

fn sum_sq<'a>(counts: impl Iterator<Item = &'a u64>) -> u128 {
    counts.map(|&c| c as u128 * c as u128).sum()
}

/// Adapted Rand error of `seg` against `gt`. With `ignore_zero_gt` only voxels
/// where the ground truth is non-zero are counted.
pub fn adapted_rand_error(seg: &LabelMap, gt: &LabelMap, ignore_zero_gt: bool) -> Result<RandScores> {
    seg.dims().check_same(&gt.dims(), "adapted_rand_error")?;
    Ok(adapted_rand_error_slices(seg.labels(), gt.labels(), ignore_zero_gt))
}

pub fn adapted_rand_error_slices(seg: &[u32], gt: &[u32], ignore_zero_gt: bool) -> RandScores {
    ContingencyTable::from_pairs(
        seg.iter()
            .zip(gt)
            .filter(|(_, &g)| !ignore_zero_gt || g != 0)
            .map(|(&s, &g)| (s, g)),
    )
    .scores()
}

/// `|A ∩ B| / |A ∪ B|`, and 1 when both sets are empty.
pub fn jaccard(a: &HashSet<usize>, b: &HashSet<usize>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
