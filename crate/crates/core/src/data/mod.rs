//! Grid containers, GRD1 file I/O, region adjacency and synthetic data.

mod grid;
pub mod io;
mod regions;
pub mod synth;

pub use grid::{Dims, GridImage, LabelMap};
pub use io::{load_grid, load_image, load_labels, save_grid, save_image, save_labels, Dtype, Grid, GridData};
pub use regions::{connected_components, region_adjacency, Boundary, BoundaryStats, RegionAdjacency};
pub use synth::{synth_volume, SynthParams};
