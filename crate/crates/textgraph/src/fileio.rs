//! Shared binary container used by the graph and checkpoint files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic            4 bytes
//! version          u32
//! header length    u64
//! header           JSON, `header length` bytes
//! payload          raw bytes
//! crc32            u32 over header and payload
//! ```

use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: String },
    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("file truncated")]
    Truncated,
    #[error("checksum mismatch: file is corrupted")]
    ChecksumMismatch,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
}

fn io_err(path: &Path, source: std::io::Error) -> ContainerError {
    ContainerError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serializes the header, concatenates the payload, checksums both, and
/// writes atomically (temp file plus rename).
pub fn write_container<H: serde::Serialize>(
    path: &Path,
    magic: &[u8; 4],
    version: u32,
    header: &H,
    payload: &[u8],
) -> Result<(), ContainerError> {
    let header_bytes = serde_json::to_vec(header)
        .map_err(|e| ContainerError::MalformedHeader(e.to_string()))?;
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&header_bytes);
    hasher.update(payload);
    let crc = hasher.finalize();

    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        file.write_all(magic).map_err(|e| io_err(&tmp, e))?;
        file.write_all(&version.to_le_bytes())
            .map_err(|e| io_err(&tmp, e))?;
        file.write_all(&(header_bytes.len() as u64).to_le_bytes())
            .map_err(|e| io_err(&tmp, e))?;
        file.write_all(&header_bytes).map_err(|e| io_err(&tmp, e))?;
        file.write_all(payload).map_err(|e| io_err(&tmp, e))?;
        file.write_all(&crc.to_le_bytes())
            .map_err(|e| io_err(&tmp, e))?;
        file.flush().map_err(|e| io_err(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Reads and verifies a container, returning the parsed header and the
/// payload bytes.
pub fn read_container<H: serde::de::DeserializeOwned>(
    path: &Path,
    magic: &[u8; 4],
    version: u32,
) -> Result<(H, Vec<u8>), ContainerError> {
    let mut file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;

    if bytes.len() < 4 + 4 + 8 + 4 {
        return Err(ContainerError::Truncated);
    }
    if &bytes[0..4] != magic {
        return Err(ContainerError::BadMagic {
            expected: String::from_utf8_lossy(magic).to_string(),
        });
    }
    let found_version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if found_version != version {
        return Err(ContainerError::VersionMismatch {
            expected: version,
            found: found_version,
        });
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let payload_start = 16 + header_len;
    if bytes.len() < payload_start + 4 {
        return Err(ContainerError::Truncated);
    }
    let payload_end = bytes.len() - 4;
    let stored_crc = u32::from_le_bytes(bytes[payload_end..].try_into().unwrap());
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&bytes[16..payload_end]);
    if hasher.finalize() != stored_crc {
        return Err(ContainerError::ChecksumMismatch);
    }
    let header: H = serde_json::from_slice(&bytes[16..payload_start])
        .map_err(|e| ContainerError::MalformedHeader(e.to_string()))?;
    Ok((header, bytes[payload_start..payload_end].to_vec()))
}

/// Appends `values` to the payload as little-endian f64.
pub fn push_f64s(payload: &mut Vec<u8>, values: &[f64]) {
    payload.reserve(values.len() * 8);
    for v in values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
}

/// Appends `values` to the payload as little-endian u32.
pub fn push_u32s(payload: &mut Vec<u8>, values: &[u32]) {
    payload.reserve(values.len() * 4);
    for v in values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
}

/// Sequential reader over a payload byte slice.
pub struct PayloadReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        PayloadReader { bytes, pos: 0 }
    }

    pub fn read_f64s(&mut self, count: usize) -> Result<Vec<f64>, ContainerError> {
        let end = self.pos + count * 8;
        if end > self.bytes.len() {
            return Err(ContainerError::Truncated);
        }
        let out = self.bytes[self.pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos = end;
        Ok(out)
    }

    pub fn read_u32s(&mut self, count: usize) -> Result<Vec<u32>, ContainerError> {
        let end = self.pos + count * 4;
        if end > self.bytes.len() {
            return Err(ContainerError::Truncated);
        }
        let out = self.bytes[self.pos..end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos = end;
        Ok(out)
    }

    pub fn read_u8s(&mut self, count: usize) -> Result<Vec<u8>, ContainerError> {
        let end = self.pos + count;
        if end > self.bytes.len() {
            return Err(ContainerError::Truncated);
        }
        let out = self.bytes[self.pos..end].to_vec();
        self.pos = end;
        Ok(out)
    }

    pub fn finish(self) -> Result<(), ContainerError> {
        if self.pos != self.bytes.len() {
            return Err(ContainerError::Truncated);
        }
        Ok(())
    }
}
