//! Tensor-store checkpoints and NPY array files.
//!
//! Both formats are little-endian. Everything is converted to `f64` on read.

mod npy;
mod store;

pub use npy::{read_array_bytes, read_array_file, write_array_bytes, write_array_file};
pub use store::{
    open_tensor_store, parse_tensor_store, write_tensor_store, write_tensor_store_bytes,
    TensorEntry, TensorStore, TensorWrite,
};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DType {
    F16,
    F32,
    F64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F16 => 2,
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            DType::F16 => "F16",
            DType::F32 => "F32",
            DType::F64 => "F64",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "F16" => Some(DType::F16),
            "F32" => Some(DType::F32),
            "F64" => Some(DType::F64),
            _ => None,
        }
    }

    /// Decodes `bytes` (a whole number of elements) into `out`.
    pub(crate) fn decode_into(self, bytes: &[u8], out: &mut Vec<f64>) {
        match self {
            DType::F16 => out.extend(
                bytes
                    .chunks_exact(2)
                    .map(|c| half::f16::from_le_bytes([c[0], c[1]]).to_f64()),
            ),
            DType::F32 => out.extend(
                bytes
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))),
            ),
            DType::F64 => {
                out.extend(bytes.chunks_exact(8).map(|c| {
                    f64::from_le_bytes(c.try_into().expect("chunks_exact yields 8 bytes"))
                }))
            }
        }
    }

    pub(crate) fn encode_into(self, values: &[f64], out: &mut Vec<u8>) {
        match self {
            DType::F16 => {
                for &v in values {
                    out.extend_from_slice(&half::f16::from_f64(v).to_le_bytes());
                }
            }
            DType::F32 => {
                for &v in values {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            DType::F64 => {
                for &v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum TensorIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truncated header")]
    TruncatedHeader,
    #[error("truncated file: header declares {declared} bytes but only {available} follow")]
    TruncatedFile { declared: u64, available: u64 },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported dtype {dtype:?} for '{name}'")]
    UnsupportedDtype { name: String, dtype: String },
    #[error(
        "size mismatch for '{name}': shape needs {expected} bytes, data_offsets span {actual}"
    )]
    SizeMismatch {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("data_offsets of '{name}' out of bounds ({begin}..{end}, data region is {len} bytes)")]
    OutOfBounds {
        name: String,
        begin: usize,
        end: usize,
        len: usize,
    },
    #[error("data_offsets of '{name}' overlap those of '{other}'")]
    Overlap { name: String, other: String },
    #[error("unknown tensor '{0}'")]
    UnknownTensor(String),
    #[error("tensor '{name}' has rank {rank}; only rank 1 and 2 are supported")]
    RankUnsupported { name: String, rank: usize },
    #[error("not an NPY file (bad magic)")]
    BadMagic,
    #[error("unsupported NPY version {0}.{1}")]
    UnsupportedVersion(u8, u8),
    #[error("NPY arrays in Fortran order are not supported")]
    FortranOrder,
    #[error("unsupported NPY element type {0:?}; expected one of <f2, <f4, <f8")]
    UnsupportedElement(String),
    #[error("NPY payload holds {actual} bytes, shape needs {expected}")]
    PayloadSize { expected: usize, actual: usize },
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> TensorIoError {
    let path = path.into();
    move |source| TensorIoError::Io { path, source }
}
