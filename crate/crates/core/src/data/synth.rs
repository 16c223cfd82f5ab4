//! Synthetic cell images: a Voronoi partition as ground truth and a blurred,
//! noisy membrane map as the confidence input.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::{Dims, GridImage, LabelMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub dims: [usize; 3],
    pub n_cells: usize,
    /// Membrane thickness in voxels, rounded up to an even number.
    pub membrane_width: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            dims: [64, 64, 1],
            n_cells: 12,
            membrane_width: 2,
            noise_std: 0.2,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn grid_dims(&self) -> Dims {
        Dims::new(self.dims[0], self.dims[1], self.dims[2])
    }

    fn validate(&self) -> Result<()> {
        let n = self.grid_dims().len();
        if n == 0 {
            return Err(Error::InvalidParameter("dims must be positive".into()));
        }
        if self.n_cells == 0 || self.n_cells > n {
            return Err(Error::InvalidParameter(format!(
                "n_cells = {} must lie in 1..={n}",
                self.n_cells
            )));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise_std = {} must be finite and >= 0",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Generate `(conf, gt)` deterministically from `p.seed`.
pub fn synth_volume(p: &SynthParams) -> Result<(GridImage, LabelMap)> {
    p.validate()?;
    let dims = p.grid_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let sites: Vec<usize> = sample(&mut rng, dims.len(), p.n_cells).into_vec();
    let sites: Vec<(usize, usize, usize)> = sites.into_iter().map(|i| dims.coords(i)).collect();
    render_sites(dims, &sites, p.membrane_width, p.noise_std, &mut rng)
}

/// Voronoi partition of `sites` (ties go to the lower site index), labels
/// `1..=sites.len()`.
pub fn voronoi(dims: Dims, sites: &[(usize, usize, usize)]) -> LabelMap {
    let mut labels = vec![0u32; dims.len()];
    for (idx, out) in labels.iter_mut().enumerate() {
        let (x, y, z) = dims.coords(idx);
        let mut best = (u64::MAX, 0usize);
        for (k, &(sx, sy, sz)) in sites.iter().enumerate() {
            let d = sq(x, sx) + sq(y, sy) + sq(z, sz);
            if d < best.0 {
                best = (d, k);
            }
        }
        *out = best.1 as u32 + 1;
    }
    LabelMap::new(dims, labels).expect("same dims")
}

fn sq(a: usize, b: usize) -> u64 {
    let d = a.abs_diff(b) as u64;
    d * d
}

/// Render the membrane map for a given set of sites.
pub fn render_sites<R: Rng>(
    dims: Dims,
    sites: &[(usize, usize, usize)],
    membrane_width: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<(GridImage, LabelMap)> {
    let gt = voronoi(dims, sites);
    let mut mask = membrane_mask(&gt);
    let radius = membrane_width.div_ceil(2).saturating_sub(1);
    if radius > 0 {
        mask = dilate(dims, &mask, radius);
    }
    let indicator = GridImage::new(
        dims,
        mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )?;
    let mut conf = indicator.box_smoothed(1);
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in conf.values_mut() {
            *v = (*v as f64 + normal.sample(rng)) as f32;
        }
    }
    for v in conf.values_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok((conf, gt))
}

/// Voxels with a face neighbour of a different label.
fn membrane_mask(gt: &LabelMap) -> Vec<bool> {
    let dims = gt.dims();
    (0..dims.len())
        .map(|v| dims.face_neighbors(v).any(|w| gt.get(w) != gt.get(v)))
        .collect()
}

fn dilate(dims: Dims, mask: &[bool], radius: usize) -> Vec<bool> {
    let as_img = GridImage::new(
        dims,
        mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )
    .expect("same dims");
    // a box mean above zero means some voxel in the window is set
    as_img
        .box_smoothed(radius)
        .values()
        .iter()
        .map(|&v| v > 0.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let p = SynthParams {
            dims: [24, 20, 1],
            n_cells: 5,
            seed: 11,
            ..Default::default()
        };
        let a = synth_volume(&p).unwrap();
        let b = synth_volume(&p).unwrap();
        assert_eq!(a, b);
        let c = synth_volume(&SynthParams { seed: 12, ..p }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn single_cell_has_no_membrane() {
        let p = SynthParams {
            dims: [2, 2, 1],
            n_cells: 1,
            noise_std: 0.0,
            ..Default::default()
        };
        let (conf, gt) = synth_volume(&p).unwrap();
        assert_eq!(gt.labels(), &[1, 1, 1, 1]);
        assert!(conf.values().iter().all(|&v| v.abs() < 1e-6));
    }

    #[test]
    fn too_many_cells() {
        let p = SynthParams {
            dims: [2, 2, 1],
            n_cells: 5,
            ..Default::default()
        };
        assert!(matches!(synth_volume(&p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn noiseless_values_are_confidences() {
        let p = SynthParams {
            dims: [32, 32, 1],
            n_cells: 6,
            noise_std: 0.0,
            membrane_width: 4,
            seed: 3,
        };
        let (conf, gt) = synth_volume(&p).unwrap();
        assert!(conf.is_confidence());
        assert_eq!(gt.distinct(), (1..=6).collect::<Vec<u32>>());
        // box means of a 0/1 indicator over 3x3 windows are multiples of 1/9, 1/6 or 1/4
        for &v in conf.values() {
            let ok = [4.0f32, 6.0, 9.0]
                .iter()
                .any(|d| ((v * d).round() - v * d).abs() < 1e-4);
            assert!(ok, "unexpected plateau value {v}");
        }
    }

    #[test]
    fn voronoi_ties_go_to_lower_site() {
        let dims = Dims::planar(3, 1);
        let gt = voronoi(dims, &[(0, 0, 0), (2, 0, 0)]);
        assert_eq!(gt.labels(), &[1, 1, 2]);
    }
}
