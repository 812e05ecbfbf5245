//! `CLF1` volume files.
//!
//! Layout (all integers little-endian):
//!
//! | bytes       | field                                         |
//! |-------------|-----------------------------------------------|
//! | 0..4        | magic `CLF1`                                  |
//! | 4           | version, `1`                                  |
//! | 5           | dtype: 1 = f32, 2 = f64, 3 = i32 labels       |
//! | 6           | spatial dimension `d` (2 or 3)                |
//! | 7           | components: 1 (scalar) or `d` (vector)        |
//! | 8..8+4d     | dims, `d × u32`                               |
//! | 8+4d..      | payload, component-major, C order             |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::metrics::LabelVolume;
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"CLF1";
pub const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F32 = 1,
    F64 = 2,
    I32 = 3,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 | Dtype::I32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
            Dtype::I32 => "i32",
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::F64),
            3 => Ok(Dtype::I32),
            _ => Err(Error::Format(format!("unknown dtype code {c}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum VolumeData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I32(Vec<i32>),
}

impl VolumeData {
    pub fn dtype(&self) -> Dtype {
        match self {
            VolumeData::F32(_) => Dtype::F32,
            VolumeData::F64(_) => Dtype::F64,
            VolumeData::I32(_) => Dtype::I32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VolumeData::F32(x) => x.len(),
            VolumeData::F64(x) => x.len(),
            VolumeData::I32(x) => x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Decoded volume: spatial dims, component count and raw samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub dims: Vec<usize>,
    pub components: usize,
    pub data: VolumeData,
}

impl Volume {
    pub fn new(dims: Vec<usize>, components: usize, data: VolumeData) -> Result<Self> {
        let d = dims.len();
        if d != 2 && d != 3 {
            return Err(Error::Format(format!("dimension {d} not in {{2, 3}}")));
        }
        if components != 1 && components != d {
            return Err(Error::Format(format!("{components} components for d = {d}")));
        }
        if dims.iter().any(|&n| n == 0 || n > u32::MAX as usize) {
            return Err(Error::Format(format!("dims {dims:?} out of range")));
        }
        let expected = components * dims.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::Format(format!("{} samples, header implies {expected}", data.len())));
        }
        Ok(Self { dims, components, data })
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn from_scalar<T: Real>(f: &ScalarField<T>) -> Self {
        let dims = f.grid().dims().to_vec();
        Self { dims, components: 1, data: float_data(f.values()) }
    }

    pub fn from_vector<T: Real>(v: &VectorField<T>) -> Self {
        let mut all = Vec::with_capacity(v.dim() * v.grid().len());
        for c in v.components() {
            all.extend_from_slice(c.values());
        }
        Self { dims: v.grid().dims().to_vec(), components: v.dim(), data: float_data(&all) }
    }

    pub fn from_labels(l: &LabelVolume) -> Self {
        Self { dims: l.grid().dims().to_vec(), components: 1, data: VolumeData::I32(l.labels().to_vec()) }
    }

    /// Grid with these spatial dims and `nt` time steps.
    pub fn grid(&self, nt: usize) -> Result<Grid> {
        Grid::new(&self.dims, nt)
    }

    /// Scalar field in precision `T`; floating samples of the other width are converted.
    pub fn to_scalar<T: Real>(&self, nt: usize) -> Result<ScalarField<T>> {
        self.expect_components(1)?;
        ScalarField::new(self.grid(nt)?, self.float_samples()?)
    }

    pub fn to_vector<T: Real>(&self, nt: usize) -> Result<VectorField<T>> {
        self.expect_components(self.dims.len())?;
        let grid = self.grid(nt)?;
        let all = self.float_samples::<T>()?;
        let comps = all.chunks(grid.len()).map(|c| ScalarField::new(grid, c.to_vec())).collect::<Result<_>>()?;
        VectorField::from_components(comps)
    }

    pub fn to_labels(&self) -> Result<LabelVolume> {
        self.expect_components(1)?;
        match &self.data {
            VolumeData::I32(x) => LabelVolume::new(self.grid(1)?, x.clone()),
            other => Err(Error::DtypeMismatch { expected: "i32", found: other.dtype().name() }),
        }
    }

    fn expect_components(&self, c: usize) -> Result<()> {
        if self.components != c {
            return Err(Error::Format(format!("expected {c} component(s), file has {}", self.components)));
        }
        Ok(())
    }

    fn float_samples<T: Real>(&self) -> Result<Vec<T>> {
        match &self.data {
            VolumeData::F32(x) => Ok(x.iter().map(|&s| T::from_f32(s).expect("f32 sample")).collect()),
            VolumeData::F64(x) => Ok(x.iter().map(|&s| T::from_f64(s).expect("f64 sample")).collect()),
            VolumeData::I32(_) => Err(Error::DtypeMismatch { expected: "f32 or f64", found: "i32" }),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let d = self.dims.len();
        let mut out = Vec::with_capacity(8 + 4 * d + self.data.len() * self.dtype().size());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&[VERSION, self.dtype() as u8, d as u8, self.components as u8]);
        for &n in &self.dims {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        match &self.data {
            VolumeData::F32(x) => x.iter().for_each(|s| out.extend_from_slice(&s.to_le_bytes())),
            VolumeData::F64(x) => x.iter().for_each(|s| out.extend_from_slice(&s.to_le_bytes())),
            VolumeData::I32(x) => x.iter().for_each(|s| out.extend_from_slice(&s.to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Format(format!("{} bytes is shorter than the fixed header", bytes.len())));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", bytes[4])));
        }
        let dtype = Dtype::from_code(bytes[5])?;
        let d = bytes[6] as usize;
        let components = bytes[7] as usize;
        if d != 2 && d != 3 {
            return Err(Error::Format(format!("dimension {d} not in {{2, 3}}")));
        }
        if components != 1 && components != d {
            return Err(Error::Format(format!("{components} components for d = {d}")));
        }
        let header = 8 + 4 * d;
        if bytes.len() < header {
            return Err(Error::Format("header ends before the dims".into()));
        }
        let raw: Vec<[u8; 4]> = bytes[8..header].chunks(4).map(|c| c.try_into().expect("4 bytes")).collect();
        let payload = &bytes[header..];
        let expected_len = |dims: &[u64]| dims.iter().product::<u64>() * (components * dtype.size()) as u64;

        let le: Vec<u64> = raw.iter().map(|b| u32::from_le_bytes(*b) as u64).collect();
        let expected = expected_len(&le);
        if expected != payload.len() as u64 {
            // A header written big-endian only agrees with the payload size when swapped.
            let be: Vec<u64> = raw.iter().map(|b| u32::from_be_bytes(*b) as u64).collect();
            if be.iter().all(|&n| n > 0) && expected_len(&be) == payload.len() as u64 {
                return Err(Error::ByteOrder);
            }
            if (payload.len() as u64) < expected {
                return Err(Error::TruncatedPayload { expected: expected as usize, found: payload.len() });
            }
            return Err(Error::Format(format!("{} trailing bytes after payload", payload.len() as u64 - expected)));
        }
        if le.contains(&0) {
            return Err(Error::Format(format!("zero-length axis in dims {le:?}")));
        }
        let dims = le.iter().map(|&n| n as usize).collect();
        let data = match dtype {
            Dtype::F32 => VolumeData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            Dtype::F64 => VolumeData::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            Dtype::I32 => VolumeData::I32(payload.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap())).collect()),
        };
        Ok(Self { dims, components, data })
    }
}

fn float_data<T: Real>(x: &[T]) -> VolumeData {
    if T::NAME == "f32" {
        VolumeData::F32(x.iter().map(|s| s.to_f32().expect("f32")).collect())
    } else {
        VolumeData::F64(x.iter().map(|s| s.to_f64_lossy()).collect())
    }
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    Volume::decode(&fs::read(path)?)
}

pub fn write_volume(path: impl AsRef<Path>, volume: &Volume) -> Result<()> {
    fs::write(path, volume.encode())?;
    Ok(())
}
