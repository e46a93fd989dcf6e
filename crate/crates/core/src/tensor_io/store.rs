use super::{io_err, DType, TensorIoError};
use crate::matrix::DenseMatrix;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorEntry {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    /// Offsets relative to the start of the data region.
    pub begin: usize,
    pub end: usize,
}

impl TensorEntry {
    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

/// An opened checkpoint: parsed header plus the raw data region.
///
/// Immutable after construction; share it freely across threads.
#[derive(Debug, Clone)]
pub struct TensorStore {
    entries: BTreeMap<String, TensorEntry>,
    metadata: BTreeMap<String, String>,
    data: Vec<u8>,
}

pub fn open_tensor_store(path: impl AsRef<Path>) -> Result<TensorStore, TensorIoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    parse_tensor_store(bytes)
}

pub fn parse_tensor_store(mut bytes: Vec<u8>) -> Result<TensorStore, TensorIoError> {
    if bytes.len() < 8 {
        return Err(TensorIoError::TruncatedHeader);
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let available = (bytes.len() - 8) as u64;
    if header_len > available {
        return Err(TensorIoError::TruncatedFile {
            declared: header_len,
            available,
        });
    }
    let header_end = 8 + header_len as usize;
    let text = std::str::from_utf8(&bytes[8..header_end])
        .map_err(|e| TensorIoError::MalformedHeader(format!("header is not UTF-8: {e}")))?;
    let header: Map<String, Value> = match serde_json::from_str(text) {
        Ok(Value::Object(m)) => m,
        Ok(_) => {
            return Err(TensorIoError::MalformedHeader(
                "header is not a JSON object".into(),
            ))
        }
        Err(e) => return Err(TensorIoError::MalformedHeader(e.to_string())),
    };

    let data_len = bytes.len() - header_end;
    let mut entries = BTreeMap::new();
    let mut metadata = BTreeMap::new();
    for (name, info) in header {
        if name == "__metadata__" {
            let obj = info.as_object().ok_or_else(|| {
                TensorIoError::MalformedHeader("__metadata__ is not an object".into())
            })?;
            for (k, v) in obj {
                let v = v.as_str().ok_or_else(|| {
                    TensorIoError::MalformedHeader(format!(
                        "__metadata__ value for '{k}' is not a string"
                    ))
                })?;
                metadata.insert(k.clone(), v.to_owned());
            }
            continue;
        }
        let entry = parse_entry(&name, &info, data_len)?;
        entries.insert(name, entry);
    }

    let mut spans: Vec<&TensorEntry> = entries.values().filter(|e| e.end > e.begin).collect();
    spans.sort_by_key(|e| (e.begin, e.end));
    for pair in spans.windows(2) {
        if pair[1].begin < pair[0].end {
            return Err(TensorIoError::Overlap {
                name: pair[1].name.clone(),
                other: pair[0].name.clone(),
            });
        }
    }

    bytes.drain(..header_end);
    Ok(TensorStore {
        entries,
        metadata,
        data: bytes,
    })
}

fn parse_entry(name: &str, info: &Value, data_len: usize) -> Result<TensorEntry, TensorIoError> {
    let malformed = |what: &str| TensorIoError::MalformedHeader(format!("'{name}': {what}"));
    let obj = info
        .as_object()
        .ok_or_else(|| malformed("entry is not an object"))?;
    let tag = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing dtype"))?;
    let dtype = DType::from_tag(tag).ok_or_else(|| TensorIoError::UnsupportedDtype {
        name: name.to_owned(),
        dtype: tag.to_owned(),
    })?;
    let shape = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing shape"))?
        .iter()
        .map(|d| d.as_u64().map(|d| d as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| malformed("shape must list non-negative integers"))?;
    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .and_then(|a| Some((a[0].as_u64()? as usize, a[1].as_u64()? as usize)))
        .ok_or_else(|| malformed("data_offsets must be [begin, end]"))?;
    let (begin, end) = offsets;
    if begin > end || end > data_len {
        return Err(TensorIoError::OutOfBounds {
            name: name.to_owned(),
            begin,
            end,
            len: data_len,
        });
    }
    let expected = shape
        .iter()
        .try_fold(dtype.size(), |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| malformed("shape overflows"))?;
    if expected != end - begin {
        return Err(TensorIoError::SizeMismatch {
            name: name.to_owned(),
            expected,
            actual: end - begin,
        });
    }
    Ok(TensorEntry {
        name: name.to_owned(),
        dtype,
        shape,
        begin,
        end,
    })
}

impl TensorStore {
    pub fn entries(&self) -> impl Iterator<Item = &TensorEntry> {
        self.entries.values()
    }

    pub fn entry(&self, name: &str) -> Option<&TensorEntry> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn data_len(&self) -> usize {
        self.data.len()
    }

    /// Reads a rank-0, 1 or 2 tensor as an `f64` matrix.
    ///
    /// Rank-1 tensors become `1 x n`. Non-finite values are returned as-is.
    pub fn read_tensor(&self, name: &str) -> Result<DenseMatrix, TensorIoError> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| TensorIoError::UnknownTensor(name.to_owned()))?;
        let (rows, cols) = match entry.shape.as_slice() {
            [] => (1, 1),
            [n] => (1, *n),
            [r, c] => (*r, *c),
            s => {
                return Err(TensorIoError::RankUnsupported {
                    name: name.to_owned(),
                    rank: s.len(),
                })
            }
        };
        let mut values = Vec::with_capacity(rows * cols);
        entry
            .dtype
            .decode_into(&self.data[entry.begin..entry.end], &mut values);
        Ok(DenseMatrix::new(rows, cols, values).expect("entry size validated at open"))
    }
}

/// One tensor to be written by [`write_tensor_store`].
#[derive(Debug, Clone)]
pub struct TensorWrite<'a> {
    pub name: &'a str,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

/// Serialises tensors in the given order. Used for synthetic fixtures; this is
/// not a general checkpoint writer.
pub fn write_tensor_store_bytes(tensors: &[TensorWrite<'_>]) -> Vec<u8> {
    let mut header = Map::new();
    let mut data = Vec::new();
    for t in tensors {
        assert_eq!(
            t.shape.iter().product::<usize>(),
            t.values.len(),
            "tensor '{}' shape does not match its values",
            t.name
        );
        let begin = data.len();
        t.dtype.encode_into(t.values, &mut data);
        let mut info = Map::new();
        info.insert("dtype".into(), Value::from(t.dtype.tag()));
        info.insert("shape".into(), Value::from(t.shape.clone()));
        info.insert("data_offsets".into(), Value::from(vec![begin, data.len()]));
        header.insert(t.name.to_owned(), Value::Object(info));
    }
    let mut text = serde_json::to_string(&Value::Object(header)).expect("header serialises");
    while !text.len().is_multiple_of(8) {
        text.push(' ');
    }
    let mut out = Vec::with_capacity(8 + text.len() + data.len());
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&data);
    out
}

pub fn write_tensor_store(
    path: impl AsRef<Path>,
    tensors: &[TensorWrite<'_>],
) -> Result<(), TensorIoError> {
    let path = path.as_ref();
    std::fs::write(path, write_tensor_store_bytes(tensors)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_store(header: &str, data: &[u8]) -> Vec<u8> {
        let mut out = (header.len() as u64).to_le_bytes().to_vec();
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn minimal_store() {
        let bytes = raw_store(
            r#"{"t":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}}"#,
            &[0u8; 16],
        );
        let store = parse_tensor_store(bytes).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.entry("t").unwrap().shape, vec![2, 2]);
        let m = store.read_tensor("t").unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn four_byte_file_is_truncated_header() {
        let err = parse_tensor_store(vec![1, 2, 3, 4]).unwrap_err();
        assert_eq!(err.to_string(), "truncated header");
    }

    #[test]
    fn size_mismatch_names_tensor() {
        let bytes = raw_store(
            r#"{"t":{"dtype":"F32","shape":[2,2],"data_offsets":[0,12]}}"#,
            &[0u8; 12],
        );
        let err = parse_tensor_store(bytes).unwrap_err();
        assert!(
            err.to_string().starts_with("size mismatch for 't'"),
            "{err}"
        );
    }

    #[test]
    fn header_longer_than_file() {
        let mut bytes = raw_store("{}", &[]);
        bytes[0] = 200;
        assert!(matches!(
            parse_tensor_store(bytes),
            Err(TensorIoError::TruncatedFile { .. })
        ));
    }

    #[test]
    fn rejects_bad_dtype_overlap_and_bounds() {
        let bytes = raw_store(
            r#"{"q":{"dtype":"I8","shape":[1],"data_offsets":[0,1]}}"#,
            &[0u8; 1],
        );
        match parse_tensor_store(bytes).unwrap_err() {
            TensorIoError::UnsupportedDtype { name, .. } => assert_eq!(name, "q"),
            e => panic!("{e}"),
        }

        let bytes = raw_store(
            r#"{"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},"b":{"dtype":"F32","shape":[2],"data_offsets":[4,12]}}"#,
            &[0u8; 12],
        );
        assert!(matches!(
            parse_tensor_store(bytes),
            Err(TensorIoError::Overlap { .. })
        ));

        let bytes = raw_store(
            r#"{"a":{"dtype":"F32","shape":[4],"data_offsets":[0,16]}}"#,
            &[0u8; 8],
        );
        match parse_tensor_store(bytes).unwrap_err() {
            TensorIoError::OutOfBounds { name, .. } => assert_eq!(name, "a"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn malformed_json() {
        let bytes = raw_store("{not json", &[]);
        assert!(matches!(
            parse_tensor_store(bytes),
            Err(TensorIoError::MalformedHeader(_))
        ));
    }

    #[test]
    fn metadata_and_empty_header() {
        let bytes = raw_store(r#"{"__metadata__":{"format":"pt"}}"#, &[]);
        let store = parse_tensor_store(bytes).unwrap();
        assert!(store.is_empty());
        assert_eq!(store.metadata()["format"], "pt");
    }

    #[test]
    fn f16_one_and_exact_f32() {
        let mut data = 0x3C00u16.to_le_bytes().to_vec();
        data.extend_from_slice(&1.5f32.to_le_bytes());
        let bytes = raw_store(
            r#"{"h":{"dtype":"F16","shape":[1],"data_offsets":[0,2]},"f":{"dtype":"F32","shape":[1],"data_offsets":[2,6]}}"#,
            &data,
        );
        let store = parse_tensor_store(bytes).unwrap();
        assert_eq!(store.read_tensor("h").unwrap().values(), &[1.0]);
        assert_eq!(store.read_tensor("f").unwrap().values(), &[1.5]);
    }

    #[test]
    fn bias_vector_is_row_matrix_and_rank3_rejected() {
        let bias = vec![0.25; 768];
        let cube = vec![0.0; 8];
        let bytes = write_tensor_store_bytes(&[
            TensorWrite {
                name: "bias",
                dtype: DType::F32,
                shape: vec![768],
                values: &bias,
            },
            TensorWrite {
                name: "cube",
                dtype: DType::F64,
                shape: vec![2, 2, 2],
                values: &cube,
            },
        ]);
        let store = parse_tensor_store(bytes).unwrap();
        assert_eq!(store.read_tensor("bias").unwrap().shape(), (1, 768));
        assert!(matches!(
            store.read_tensor("cube"),
            Err(TensorIoError::RankUnsupported { rank: 3, .. })
        ));
        assert!(matches!(
            store.read_tensor("nope"),
            Err(TensorIoError::UnknownTensor(_))
        ));
    }

    #[test]
    fn nonfinite_values_are_readable() {
        let vals = [f64::NAN, 1.0, f64::INFINITY];
        let bytes = write_tensor_store_bytes(&[TensorWrite {
            name: "x",
            dtype: DType::F32,
            shape: vec![3],
            values: &vals,
        }]);
        let m = parse_tensor_store(bytes).unwrap().read_tensor("x").unwrap();
        assert_eq!(m.nonfinite_count(), 2);
    }
}
