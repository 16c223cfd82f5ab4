//! GRD1 binary container.
//!
//! Layout: magic `GRD1`, three little-endian `u32` dims (nx, ny, nz), one
//! dtype byte (0 = u8, 1 = u16, 2 = u32, 3 = f32), then the payload in
//! x-fastest order, little-endian.

use std::fs;
use std::path::Path;

use super::grid::{Dims, GridImage, LabelMap};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GRD1";
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    U16,
    U32,
    F32,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::U8 => 0,
            Dtype::U16 => 1,
            Dtype::U32 => 2,
            Dtype::F32 => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => Dtype::U8,
            1 => Dtype::U16,
            2 => Dtype::U32,
            3 => Dtype::F32,
            other => return Err(Error::UnknownDtype(other)),
        })
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::U32 | Dtype::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::U32 => "u32",
            Dtype::F32 => "f32",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
    F32(Vec<f32>),
}

impl GridData {
    pub fn dtype(&self) -> Dtype {
        match self {
            GridData::U8(_) => Dtype::U8,
            GridData::U16(_) => Dtype::U16,
            GridData::U32(_) => Dtype::U32,
            GridData::F32(_) => Dtype::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GridData::U8(v) => v.len(),
            GridData::U16(v) => v.len(),
            GridData::U32(v) => v.len(),
            GridData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A grid as stored on disk, with its dtype preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: Dims,
    pub data: GridData,
}

impl Grid {
    pub fn new(dims: Dims, data: GridData) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimsMismatch(format!(
                "{} values for {} voxels",
                data.len(),
                dims.len()
            )));
        }
        Ok(Grid { dims, data })
    }

    pub fn into_image(self) -> Result<GridImage> {
        match self.data {
            GridData::F32(v) => GridImage::new(self.dims, v),
            other => Err(Error::WrongDtype {
                expected: "f32",
                found: other.dtype().name(),
            }),
        }
    }

    /// Any unsigned dtype widens to a `u32` label map.
    pub fn into_labels(self) -> Result<LabelMap> {
        let labels = match self.data {
            GridData::U8(v) => v.into_iter().map(u32::from).collect(),
            GridData::U16(v) => v.into_iter().map(u32::from).collect(),
            GridData::U32(v) => v,
            GridData::F32(_) => {
                return Err(Error::WrongDtype {
                    expected: "integer",
                    found: "f32",
                })
            }
        };
        LabelMap::new(self.dims, labels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dims;
        let dtype = self.data.dtype();
        let mut out = Vec::with_capacity(HEADER_LEN + d.len() * dtype.size());
        out.extend_from_slice(MAGIC);
        for n in [d.nx, d.ny, d.nz] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.push(dtype.code());
        match &self.data {
            GridData::U8(v) => out.extend_from_slice(v),
            GridData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            GridData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            GridData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            let mut found = [0u8; 4];
            let n = bytes.len().min(4);
            found[..n].copy_from_slice(&bytes[..n]);
            return Err(Error::BadMagic { found });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::DimsMismatch(format!(
                "truncated header: {} bytes",
                bytes.len()
            )));
        }
        let dim = |i: usize| {
            let o = 4 + 4 * i;
            u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
        };
        let dims = Dims::new(dim(0), dim(1), dim(2));
        let dtype = Dtype::from_code(bytes[16])?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != dims.len() * dtype.size() {
            return Err(Error::DimsMismatch(format!(
                "header {}x{}x{} {} needs {} payload bytes, found {}",
                dims.nx,
                dims.ny,
                dims.nz,
                dtype.name(),
                dims.len() * dtype.size(),
                payload.len()
            )));
        }
        let data = match dtype {
            Dtype::U8 => GridData::U8(payload.to_vec()),
            Dtype::U16 => GridData::U16(
                payload
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            ),
            Dtype::U32 => GridData::U32(
                payload
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            Dtype::F32 => GridData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        Ok(Grid { dims, data })
    }
}

impl From<GridImage> for Grid {
    fn from(g: GridImage) -> Self {
        Grid {
            dims: g.dims(),
            data: GridData::F32(g.into_values()),
        }
    }
}

impl From<LabelMap> for Grid {
    fn from(m: LabelMap) -> Self {
        Grid {
            dims: m.dims(),
            data: GridData::U32(m.into_labels()),
        }
    }
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Grid::from_bytes(&bytes)
}

pub fn save_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, grid.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GridImage> {
    load_grid(path)?.into_image()
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    load_grid(path)?.into_labels()
}

pub fn save_image(image: &GridImage, path: impl AsRef<Path>) -> Result<()> {
    save_grid(&Grid::from(image.clone()), path)
}

pub fn save_labels(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    save_grid(&Grid::from(map.clone()), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_f32_voxel_is_21_bytes() {
        let g = Grid::from(GridImage::filled(Dims::new(1, 1, 1), 0.5));
        let bytes = g.to_bytes();
        assert_eq!(bytes.len(), 21);
        assert_eq!(&bytes[..4], b"GRD1");
        assert_eq!(&bytes[4..16], &[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(bytes[16], 3);
        assert_eq!(&bytes[17..], &0.5f32.to_le_bytes());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = Grid::from(GridImage::filled(Dims::new(1, 1, 1), 0.5)).to_bytes();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            Grid::from_bytes(&bytes),
            Err(Error::BadMagic { found }) if &found == b"XXXX"
        ));
    }

    #[test]
    fn short_payload_is_dims_mismatch() {
        let mut bytes = Grid::from(GridImage::filled(Dims::new(2, 2, 1), 0.5)).to_bytes();
        bytes.truncate(HEADER_LEN + 3 * 4);
        assert!(matches!(Grid::from_bytes(&bytes), Err(Error::DimsMismatch(_))));
    }

    #[test]
    fn unknown_dtype() {
        let mut bytes = Grid::from(LabelMap::filled(Dims::new(1, 1, 1), 3)).to_bytes();
        bytes[16] = 9;
        assert!(matches!(Grid::from_bytes(&bytes), Err(Error::UnknownDtype(9))));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.grd");
        let map = LabelMap::new(Dims::new(3, 2, 1), vec![1, 2, 3, 4, 5, u32::MAX]).unwrap();
        save_labels(&map, &path).unwrap();
        assert_eq!(load_labels(&path).unwrap(), map);
        assert!(matches!(load_image(&path), Err(Error::WrongDtype { .. })));
    }

    fn arb_grid() -> impl Strategy<Value = Grid> {
        (1usize..5, 1usize..5, 1usize..3, 0u8..4).prop_flat_map(|(nx, ny, nz, code)| {
            let n = nx * ny * nz;
            let dims = Dims::new(nx, ny, nz);
            let data = match code {
                0 => prop::collection::vec(any::<u8>(), n).prop_map(GridData::U8).boxed(),
                1 => prop::collection::vec(any::<u16>(), n).prop_map(GridData::U16).boxed(),
                2 => prop::collection::vec(any::<u32>(), n).prop_map(GridData::U32).boxed(),
                _ => prop::collection::vec(any::<u32>(), n)
                    .prop_map(|v| GridData::F32(v.into_iter().map(f32::from_bits).collect()))
                    .boxed(),
            };
            data.prop_map(move |data| Grid { dims, data })
        })
    }

    fn bitwise(g: &Grid) -> Vec<u8> {
        g.to_bytes()
    }

    proptest! {
        #[test]
        fn bytes_roundtrip_bit_exact(g in arb_grid()) {
            let back = Grid::from_bytes(&g.to_bytes()).unwrap();
            prop_assert_eq!(back.dims, g.dims);
            // compare bytes so NaN payloads count as equal
            prop_assert_eq!(bitwise(&back), bitwise(&g));
        }
    }
}
