//! `VGTF` binary tensor container.
//!
//! Layout (all little-endian, no padding):
//!
//! ```text
//! magic   4 bytes  "VGTF"
//! version u16      FORMAT_VERSION
//! dtype   u8       0 = f32, 1 = f64, 2 = u8
//! rank    u8
//! dims    rank × u64
//! payload product(dims) × sizeof(dtype), row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"VGTF";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("truncated tensor: {0}")]
    Truncated(&'static str),
    #[error("payload is {actual} bytes, header implies {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("element count {elements} does not match dims {dims:?}")]
    ShapeMismatch { dims: Vec<usize>, elements: usize },
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
    U8 = 2,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
            DType::U8 => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self, TensorError> {
        match c {
            0 => Ok(DType::F32),
            1 => Ok(DType::F64),
            2 => Ok(DType::U8),
            other => Err(TensorError::UnknownDtype(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::U8(_) => DType::U8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self, TensorError> {
        let elements = dims.iter().product::<usize>();
        if elements != data.len() || dims.len() > u8::MAX as usize {
            return Err(TensorError::ShapeMismatch { dims, elements: data.len() });
        }
        Ok(Self { dims, data })
    }

    pub fn from_f64(dims: Vec<usize>, v: Vec<f64>) -> Result<Self, TensorError> {
        Self::new(dims, TensorData::F64(v))
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Values widened to `f64`. `u8` data is mapped to `[0, 1]` by dividing by 255.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&x| x as f64 / 255.0).collect(),
        }
    }

    pub fn expect_rank(&self, rank: usize) -> Result<(), TensorError> {
        if self.rank() != rank {
            return Err(TensorError::Unexpected {
                expected: format!("rank {rank}"),
                found: format!("rank {} {:?}", self.rank(), self.dims),
            });
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let dtype = self.data.dtype();
        let mut out =
            Vec::with_capacity(HEADER_LEN + 8 * self.dims.len() + self.data.len() * dtype.size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(dtype as u8);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TensorError> {
        if bytes.len() < HEADER_LEN {
            return Err(TensorError::Truncated("header"));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(TensorError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(TensorError::UnsupportedVersion(version));
        }
        let dtype = DType::from_code(bytes[6])?;
        let rank = bytes[7] as usize;
        let dims_end = HEADER_LEN + 8 * rank;
        if bytes.len() < dims_end {
            return Err(TensorError::Truncated("dims"));
        }
        let mut dims = Vec::with_capacity(rank);
        let mut elements: usize = 1;
        for chunk in bytes[HEADER_LEN..dims_end].chunks_exact(8) {
            let d = u64::from_le_bytes(chunk.try_into().unwrap());
            let d = usize::try_from(d).map_err(|_| TensorError::Truncated("dimension overflow"))?;
            elements = elements
                .checked_mul(d)
                .ok_or(TensorError::Truncated("dimension overflow"))?;
            dims.push(d);
        }
        let payload = &bytes[dims_end..];
        let expected = elements
            .checked_mul(dtype.size())
            .ok_or(TensorError::Truncated("dimension overflow"))?;
        if payload.len() != expected {
            return Err(TensorError::LengthMismatch { expected, actual: payload.len() });
        }
        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
            ),
            DType::F64 => TensorData::F64(
                payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            ),
            DType::U8 => TensorData::U8(payload.to_vec()),
        };
        Ok(Self { dims, data })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), TensorError> {
        w.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, TensorError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::decode(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TensorError> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TensorError> {
        Self::decode(&std::fs::read(path)?)
    }
}
