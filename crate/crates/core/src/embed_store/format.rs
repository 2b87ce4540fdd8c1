//! Binary vector file format.
//!
//! Layout (little-endian):
//!
//! ```text
//! "EVEC" | version: u32 = 1 | dtype: u8 = 1 (f32) | dim: u32 | count: u64 | count * dim f32
//! ```
//!
//! Row order defines `embedding_row`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::vector::VectorTable;
use super::StoreError;

pub const MAGIC: &[u8; 4] = b"EVEC";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 1 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorHeader {
    pub dim: u32,
    pub count: u64,
}

fn parse_header(buf: &[u8; HEADER_LEN]) -> Result<VectorHeader, StoreError> {
    if &buf[0..4] != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let dtype = buf[8];
    if dtype != DTYPE_F32 {
        return Err(StoreError::UnsupportedDtype(dtype));
    }
    let dim = u32::from_le_bytes(buf[9..13].try_into().unwrap());
    if dim == 0 {
        return Err(StoreError::MalformedHeader("dim must be positive".into()));
    }
    let count = u64::from_le_bytes(buf[13..21].try_into().unwrap());
    Ok(VectorHeader { dim, count })
}

/// Decodes a complete vector file image.
pub fn decode_vectors(bytes: &[u8]) -> Result<VectorTable, StoreError> {
    let mut reader = bytes;
    read_vectors_from(&mut reader)
}

pub fn read_vectors_from<R: Read>(reader: &mut R) -> Result<VectorTable, StoreError> {
    let mut header = [0u8; HEADER_LEN];
    reader.read_exact(&mut header).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => StoreError::MalformedHeader("file shorter than header".into()),
        _ => StoreError::Io(e.to_string()),
    })?;
    let VectorHeader { dim, count } = parse_header(&header)?;
    let values = (dim as u64)
        .checked_mul(count)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| StoreError::MalformedHeader(format!("dim {dim} x count {count} overflows")))?;

    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| StoreError::Io(e.to_string()))?;
    let expected_bytes = values * 4;
    if payload.len() != expected_bytes {
        return Err(StoreError::Truncated {
            expected: expected_bytes,
            found: payload.len(),
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    VectorTable::new(dim as usize, data)
}

pub fn read_vector_file(path: &Path) -> Result<VectorTable, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::open(path, e))?;
    read_vectors_from(&mut BufReader::new(file)).map_err(|e| e.at(path))
}

pub fn encode_vectors(dim: usize, rows: &[f32]) -> Vec<u8> {
    assert!(
        dim > 0 && rows.len().is_multiple_of(dim),
        "rows must be a whole number of vectors"
    );
    let count = (rows.len() / dim) as u64;
    let mut out = Vec::with_capacity(HEADER_LEN + rows.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for v in rows {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_vector_file(path: &Path, dim: usize, rows: &[f32]) -> Result<(), StoreError> {
    let file = File::create(path).map_err(|e| StoreError::open(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_vectors(dim, rows))
        .and_then(|_| w.flush())
        .map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))
}
