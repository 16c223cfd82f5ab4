//! Dense voxel grids stored x-fastest.

use crate::error::{Error, Result};

/// Grid extent. `nz == 1` denotes a 2D image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn planar(nx: usize, ny: usize) -> Self {
        Dims { nx, ny, nz: 1 }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_planar(&self) -> bool {
        self.nz == 1
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.nx;
        let rest = idx / self.nx;
        (x, rest % self.ny, rest / self.ny)
    }

    /// Face neighbours of `idx` (4 in 2D, 6 in 3D), in -x,+x,-y,+y,-z,+z order.
    pub fn face_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (x, y, z) = self.coords(idx);
        let sx = 1;
        let sy = self.nx;
        let sz = self.nx * self.ny;
        [
            (x > 0).then(|| idx - sx),
            (x + 1 < self.nx).then(|| idx + sx),
            (y > 0).then(|| idx - sy),
            (y + 1 < self.ny).then(|| idx + sy),
            (z > 0).then(|| idx - sz),
            (z + 1 < self.nz).then(|| idx + sz),
        ]
        .into_iter()
        .flatten()
    }

    /// Neighbours in the positive axis directions only, so that every face is
    /// visited exactly once when iterating over all voxels.
    pub fn forward_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (x, y, z) = self.coords(idx);
        [
            (x + 1 < self.nx).then(|| idx + 1),
            (y + 1 < self.ny).then(|| idx + self.nx),
            (z + 1 < self.nz).then(|| idx + self.nx * self.ny),
        ]
        .into_iter()
        .flatten()
    }

    pub(crate) fn check_same(&self, other: &Dims, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::DimsMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.nx, self.ny, self.nz, other.nx, other.ny, other.nz
            )));
        }
        Ok(())
    }
}

/// Scalar voxel grid. Membrane confidence maps keep every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    dims: Dims,
    values: Vec<f32>,
}

impl GridImage {
    pub fn new(dims: Dims, values: Vec<f32>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::DimsMismatch(format!(
                "{} values for {} voxels",
                values.len(),
                dims.len()
            )));
        }
        Ok(GridImage { dims, values })
    }

    pub fn filled(dims: Dims, value: f32) -> Self {
        GridImage {
            dims,
            values: vec![value; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f32 {
        self.values[idx]
    }

    pub fn is_confidence(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Separable box filter of half-width `radius`; borders average over the
    /// in-bounds part of the window. The z axis is smoothed only for volumes.
    pub fn box_smoothed(&self, radius: usize) -> GridImage {
        if radius == 0 {
            return self.clone();
        }
        let d = self.dims;
        let mut cur: Vec<f64> = self.values.iter().map(|&v| v as f64).collect();
        let axes: &[(usize, usize)] = if d.is_planar() {
            &[(1, d.nx), (d.nx, d.ny)]
        } else {
            &[(1, d.nx), (d.nx, d.ny), (d.nx * d.ny, d.nz)]
        };
        for &(stride, extent) in axes {
            let mut next = vec![0.0; cur.len()];
            for (idx, out) in next.iter_mut().enumerate() {
                let pos = (idx / stride) % extent;
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(extent - 1);
                let base = idx - pos * stride;
                let sum: f64 = (lo..=hi).map(|p| cur[base + p * stride]).sum();
                *out = sum / (hi - lo + 1) as f64;
            }
            cur = next;
        }
        GridImage {
            dims: d,
            values: cur.into_iter().map(|v| v as f32).collect(),
        }
    }
}

/// Integer region labels. In ground truth 0 means "unannotated"; superpixel
/// maps use labels >= 1 only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    dims: Dims,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(dims: Dims, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::DimsMismatch(format!(
                "{} labels for {} voxels",
                labels.len(),
                dims.len()
            )));
        }
        Ok(LabelMap { dims, labels })
    }

    pub fn filled(dims: Dims, label: u32) -> Self {
        LabelMap {
            dims,
            labels: vec![label; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    #[inline]
    pub fn get(&self, idx: usize) -> u32 {
        self.labels[idx]
    }

    pub fn has_zero(&self) -> bool {
        self.labels.contains(&0)
    }

    /// Sorted distinct labels, 0 included when present.
    pub fn distinct(&self) -> Vec<u32> {
        let mut out = self.labels.clone();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Voxel indices of every non-zero label, keyed by label.
    pub fn segments(&self) -> std::collections::BTreeMap<u32, Vec<usize>> {
        let mut out: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
        for (idx, &l) in self.labels.iter().enumerate() {
            if l != 0 {
                out.entry(l).or_default().push(idx);
            }
        }
        out
    }
}
