//! Versioned binary persistence for index snapshots.
//!
//! Layout: magic, format version, provider id, dimension, build timestamp,
//! catalog hash, entry count, then canonical entry records (strings length-
//! prefixed, vectors as little-endian f32), and a trailing SHA-256 over
//! everything before it. Loading verifies the checksum, the structure, and
//! that the stored catalog hash matches a recomputation, so a snapshot
//! round-trips bit-exactly or not at all.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{catalog_hash, IndexSnapshot, IndexedTool};
use crate::embedding::EmbeddingVector;
use crate::mcp::ToolKey;

const MAGIC: &[u8; 4] = b"TGIX";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("index file is truncated: {0}")]
    Truncated(String),
    #[error("index file checksum mismatch")]
    ChecksumMismatch,
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index format version {found} (this build reads {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("index file is malformed: {0}")]
    Malformed(String),
}

/// Serialize a snapshot into its on-disk byte layout.
pub fn encode(snapshot: &IndexSnapshot) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, &snapshot.provider_id);
    out.extend_from_slice(&(snapshot.dimension as u32).to_le_bytes());
    out.extend_from_slice(&snapshot.build_timestamp_ms.to_le_bytes());
    put_str(&mut out, &snapshot.catalog_hash);
    out.extend_from_slice(&(snapshot.entries.len() as u32).to_le_bytes());
    for entry in &snapshot.entries {
        put_str(&mut out, &entry.tool_key.server_id);
        put_str(&mut out, &entry.tool_key.name);
        put_str(&mut out, &entry.document_text);
        put_str(&mut out, &entry.raw_schema_text);
        out.extend_from_slice(&entry.schema_token_count.to_le_bytes());
        for value in &entry.vector.values {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Write the snapshot to `path`, replacing any existing file atomically
/// (write to a sibling temp file, then rename).
pub fn persist(snapshot: &IndexSnapshot, path: &Path) -> Result<(), PersistError> {
    let bytes = encode(snapshot);
    let io_err = |reason: std::io::Error| PersistError::Io {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

/// Parse snapshot bytes, verifying checksum and structure.
pub fn decode(bytes: &[u8]) -> Result<IndexSnapshot, PersistError> {
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN {
        return Err(PersistError::Truncated(format!(
            "{} bytes is below the minimum file size",
            bytes.len()
        )));
    }
    let (body, stored_checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_checksum {
        return Err(PersistError::ChecksumMismatch);
    }

    let mut cursor = Cursor { body, pos: 0 };
    let magic = cursor.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(PersistError::BadMagic);
    }
    let version = cursor.u32()?;
    if version != FORMAT_VERSION {
        return Err(PersistError::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let provider_id = cursor.string()?;
    let dimension = cursor.u32()? as usize;
    let build_timestamp_ms = cursor.i64()?;
    let stored_hash = cursor.string()?;
    let entry_count = cursor.u32()? as usize;

    let mut entries = Vec::with_capacity(entry_count);
    for _ in 0..entry_count {
        let server_id = cursor.string()?;
        let name = cursor.string()?;
        let document_text = cursor.string()?;
        let raw_schema_text = cursor.string()?;
        let schema_token_count = cursor.u64()?;
        let mut values = Vec::with_capacity(dimension);
        for _ in 0..dimension {
            values.push(f32::from_le_bytes(cursor.array()?));
        }
        entries.push(IndexedTool {
            tool_key: ToolKey::new(server_id, name),
            vector: EmbeddingVector {
                values,
                provider_id: provider_id.clone(),
            },
            document_text,
            schema_token_count,
            raw_schema_text,
        });
    }
    if cursor.pos != body.len() {
        return Err(PersistError::Malformed(format!(
            "{} trailing bytes after the last entry",
            body.len() - cursor.pos
        )));
    }
    for pair in entries.windows(2) {
        if pair[0].tool_key >= pair[1].tool_key {
            return Err(PersistError::Malformed(
                "entries are not in canonical key order".into(),
            ));
        }
    }
    let recomputed = catalog_hash(&entries);
    if recomputed != stored_hash {
        return Err(PersistError::Malformed(format!(
            "stored catalog hash {stored_hash} does not match content hash {recomputed}"
        )));
    }

    Ok(IndexSnapshot {
        entries,
        provider_id,
        dimension,
        build_timestamp_ms,
        catalog_hash: stored_hash,
    })
}

/// Read a snapshot back from disk.
pub fn load(path: &Path) -> Result<IndexSnapshot, PersistError> {
    let bytes = fs::read(path).map_err(|e| PersistError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    decode(&bytes)
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    body: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        if self.pos + n > self.body.len() {
            return Err(PersistError::Truncated(format!(
                "needed {n} bytes at offset {}, file body is {} bytes",
                self.pos,
                self.body.len()
            )));
        }
        let slice = &self.body[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], PersistError> {
        Ok(self.take(N)?.try_into().expect("take returned N bytes"))
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn i64(&mut self) -> Result<i64, PersistError> {
        Ok(i64::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String, PersistError> {
        let len = self.u64()? as usize;
        if len > self.body.len() {
            return Err(PersistError::Malformed(format!(
                "string length {len} exceeds file size"
            )));
        }
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|e| PersistError::Malformed(format!("invalid UTF-8 string: {e}")))
    }
}
