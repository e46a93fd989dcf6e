//! NPY v1.0 reading and writing for little-endian float arrays of rank <= 2.

use super::{io_err, DType, TensorIoError};
use crate::matrix::DenseMatrix;
use std::path::Path;

const MAGIC: &[u8] = b"\x93NUMPY";

pub fn read_array_file(path: impl AsRef<Path>) -> Result<DenseMatrix, TensorIoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    read_array_bytes(&bytes)
}

pub fn read_array_bytes(bytes: &[u8]) -> Result<DenseMatrix, TensorIoError> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(TensorIoError::BadMagic);
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (
            u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize,
            12,
        ),
        _ => return Err(TensorIoError::UnsupportedVersion(major, minor)),
    };
    let header_end = header_start + header_len;
    if bytes.len() < header_end {
        return Err(TensorIoError::MalformedHeader(
            "NPY header truncated".into(),
        ));
    }
    let header = std::str::from_utf8(&bytes[header_start..header_end])
        .map_err(|_| TensorIoError::MalformedHeader("NPY header is not text".into()))?;
    let parsed = parse_header(header)?;
    if parsed.fortran_order {
        return Err(TensorIoError::FortranOrder);
    }
    let dtype = match parsed.descr.as_str() {
        "<f2" => DType::F16,
        "<f4" => DType::F32,
        "<f8" => DType::F64,
        other => return Err(TensorIoError::UnsupportedElement(other.to_owned())),
    };
    let (rows, cols) = match parsed.shape.as_slice() {
        [] => (1, 1),
        [n] => (1, *n),
        [r, c] => (*r, *c),
        s => {
            return Err(TensorIoError::RankUnsupported {
                name: "<array file>".into(),
                rank: s.len(),
            })
        }
    };
    let expected = rows * cols * dtype.size();
    let payload = &bytes[header_end..];
    if payload.len() != expected {
        return Err(TensorIoError::PayloadSize {
            expected,
            actual: payload.len(),
        });
    }
    let mut values = Vec::with_capacity(rows * cols);
    dtype.decode_into(payload, &mut values);
    Ok(DenseMatrix::new(rows, cols, values).expect("payload size checked"))
}

pub fn write_array_bytes(m: &DenseMatrix, dtype: DType) -> Vec<u8> {
    let descr = match dtype {
        DType::F16 => "<f2",
        DType::F32 => "<f4",
        DType::F64 => "<f8",
    };
    let mut header = format!(
        "{{'descr': '{descr}', 'fortran_order': False, 'shape': ({}, {}), }}",
        m.rows(),
        m.cols()
    );
    // magic(6) + version(2) + len(2) + header + '\n' is padded to 64 bytes.
    let unpadded = MAGIC.len() + 4 + header.len() + 1;
    header.extend(std::iter::repeat_n(' ', (64 - unpadded % 64) % 64));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + m.len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    dtype.encode_into(m.values(), &mut out);
    out
}

pub fn write_array_file(
    path: impl AsRef<Path>,
    m: &DenseMatrix,
    dtype: DType,
) -> Result<(), TensorIoError> {
    let path = path.as_ref();
    std::fs::write(path, write_array_bytes(m, dtype)).map_err(io_err(path))
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Parses the Python dict literal of an NPY header. Only the three standard
/// keys are understood; anything else is rejected.
fn parse_header(text: &str) -> Result<Header, TensorIoError> {
    let bad = |what: &str| TensorIoError::MalformedHeader(format!("NPY header: {what}"));
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| bad("not a dict"))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest).ok_or_else(|| bad("expected quoted key"))?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| bad("expected ':'"))?
            .trim_start();
        rest = match key {
            "descr" => {
                let (v, after) = take_quoted(after).ok_or_else(|| bad("descr must be a string"))?;
                descr = Some(v.to_owned());
                after
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    a
                } else {
                    return Err(bad("fortran_order must be True or False"));
                }
            }
            "shape" => {
                let inner = after
                    .strip_prefix('(')
                    .ok_or_else(|| bad("shape must be a tuple"))?;
                let close = inner.find(')').ok_or_else(|| bad("unterminated shape"))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim_end_matches('L').parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("shape entries must be integers"))?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(bad(&format!("unexpected key {other:?}"))),
        };
        rest = rest.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(Header {
        descr: descr.ok_or_else(|| bad("missing descr"))?,
        fortran_order: fortran.ok_or_else(|| bad("missing fortran_order"))?,
        shape: shape.ok_or_else(|| bad("missing shape"))?,
    })
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let inner = &s[1..];
    let end = inner.find(q)?;
    Some((&inner[..end], &inner[end + 1..]))
}
