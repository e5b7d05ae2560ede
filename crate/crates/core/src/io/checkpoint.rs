//! Reader and writer for the safetensors container layout.
//!
//! ```text
//! [u64 little-endian header length][JSON header][data buffer]
//! ```
//!
//! The header maps each tensor name to `{dtype, shape, data_offsets}` where
//! the offsets are a `[begin, end)` byte range into the data buffer. An
//! optional `__metadata__` entry is ignored. Only `F32` and `F64` are
//! accepted; values are widened to `f64` on load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

const METADATA_KEY: &str = "__metadata__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "F32",
            Dtype::F64 => "F64",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl TensorRecord {
    pub fn new(
        name: impl Into<String>,
        dtype: Dtype,
        shape: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::ValueCount {
                shape,
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            dtype,
            shape,
            values,
        })
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Deserialize)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: [usize; 2],
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Vec<TensorRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes)
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Vec<TensorRecord>> {
    let len_bytes: [u8; 8] = bytes
        .get(..8)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| {
            Error::MalformedHeader(format!(
                "file is {} bytes, shorter than the length prefix",
                bytes.len()
            ))
        })?;
    let header_len = u64::from_le_bytes(len_bytes);
    if header_len == 0 {
        return Err(Error::MalformedHeader("header length is zero".into()));
    }
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|l| l.checked_add(8))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| {
            Error::MalformedHeader(format!(
                "declared header length {header_len} exceeds file size {}",
                bytes.len()
            ))
        })?;
    let header: Map<String, Value> = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| Error::MalformedHeader(format!("header is not a JSON object: {e}")))?;
    let buffer = &bytes[header_end..];

    let mut entries = Vec::with_capacity(header.len());
    for (name, value) in header {
        if name == METADATA_KEY {
            continue;
        }
        let entry: HeaderEntry = serde_json::from_value(value)
            .map_err(|e| Error::MalformedHeader(format!("entry {name:?}: {e}")))?;
        entries.push((name, entry));
    }

    let mut records = Vec::with_capacity(entries.len());
    let mut ranges = Vec::with_capacity(entries.len());
    for (name, entry) in &entries {
        let dtype = match entry.dtype.as_str() {
            "F32" => Dtype::F32,
            "F64" => Dtype::F64,
            other => {
                return Err(Error::UnsupportedDtype {
                    name: name.clone(),
                    dtype: other.to_string(),
                })
            }
        };
        let [begin, end] = entry.data_offsets;
        if end < begin {
            return Err(Error::MalformedHeader(format!(
                "entry {name:?}: data_offsets [{begin}, {end}) are reversed"
            )));
        }
        let numel = entry
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::MalformedHeader(format!("entry {name:?}: shape overflows")))?;
        if end - begin != numel * dtype.size() {
            return Err(Error::MalformedHeader(format!(
                "entry {name:?}: {} bytes declared for {numel} {} values",
                end - begin,
                dtype.name()
            )));
        }
        if end > buffer.len() {
            return Err(Error::TruncatedBuffer {
                name: name.clone(),
                end,
                len: buffer.len(),
            });
        }
        ranges.push((begin, end, name.as_str()));
        let raw = &buffer[begin..end];
        let values = match dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("chunk of 4"))))
                .collect(),
            Dtype::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        };
        records.push(TensorRecord {
            name: name.clone(),
            dtype,
            shape: entry.shape.clone(),
            values,
        });
    }

    ranges.sort_unstable();
    for pair in ranges.windows(2) {
        let (_, first_end, first) = pair[0];
        let (second_begin, second_end, second) = pair[1];
        // zero-length tensors occupy no bytes and cannot overlap
        if second_begin < first_end && second_end > second_begin {
            return Err(Error::OffsetOverlap {
                first: first.to_string(),
                second: second.to_string(),
            });
        }
    }
    Ok(records)
}

/// Serialize records in order. `F32` records are narrowed, which is exact
/// for values that were widened from `f32` on load.
pub fn encode_checkpoint(records: &[TensorRecord]) -> Result<Vec<u8>> {
    let mut header = Map::new();
    let mut buffer = Vec::new();
    for rec in records {
        if rec.values.len() != rec.numel() {
            return Err(Error::ValueCount {
                shape: rec.shape.clone(),
                expected: rec.numel(),
                actual: rec.values.len(),
            });
        }
        let begin = buffer.len();
        match rec.dtype {
            Dtype::F32 => {
                for &v in &rec.values {
                    buffer.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            Dtype::F64 => {
                for &v in &rec.values {
                    buffer.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        header.insert(
            rec.name.clone(),
            serde_json::json!({
                "dtype": rec.dtype.name(),
                "shape": rec.shape,
                "data_offsets": [begin, buffer.len()],
            }),
        );
    }
    let header =
        serde_json::to_vec(&header).map_err(|e| Error::json("encoding checkpoint header", e))?;
    let mut out = Vec::with_capacity(8 + header.len() + buffer.len());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&buffer);
    Ok(out)
}

pub fn write_checkpoint(path: impl AsRef<Path>, records: &[TensorRecord]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(records)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
