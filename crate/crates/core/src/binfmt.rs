//! Framing shared by the binary artifact formats: an 8-byte magic, a
//! little-endian u32 header length, a UTF-8 JSON header, then a raw
//! little-endian payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

pub const EMBEDDINGS_MAGIC: &[u8; 8] = b"GUTEMB1\0";
pub const PROJECTION_MAGIC: &[u8; 8] = b"GUTPRJ1\0";
pub const SIMILARITY_MAGIC: &[u8; 8] = b"GUTSIM1\0";

fn magic_name(magic: &[u8; 8]) -> &'static str {
    match magic {
        EMBEDDINGS_MAGIC => "GUTEMB1",
        PROJECTION_MAGIC => "GUTPRJ1",
        SIMILARITY_MAGIC => "GUTSIM1",
        _ => "unknown",
    }
}

pub(crate) fn encode<H: Serialize>(magic: &[u8; 8], header: &H, payload: &[u8]) -> Vec<u8> {
    let header = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + header.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(payload);
    out
}

/// Splits a framed buffer into its parsed header and payload bytes.
pub(crate) fn decode<'a, H: DeserializeOwned>(magic: &[u8; 8], bytes: &'a [u8]) -> Result<(H, &'a [u8])> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(Error::UnrecognizedFormat {
            expected: magic_name(magic),
        });
    }
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            expected: 12,
            found: bytes.len(),
        });
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let end = 12 + header_len;
    if bytes.len() < end {
        return Err(Error::Truncated {
            expected: end,
            found: bytes.len(),
        });
    }
    let header = serde_json::from_slice(&bytes[12..end]).map_err(|e| Error::Header(e.to_string()))?;
    Ok((header, &bytes[end..]))
}

/// Checks the payload length exactly matches what the header announces.
pub(crate) fn expect_payload(payload: &[u8], expected: usize) -> Result<()> {
    if payload.len() < expected {
        Err(Error::Truncated {
            expected,
            found: payload.len(),
        })
    } else if payload.len() > expected {
        Err(Error::Header(format!(
            "payload holds {} bytes but the header describes {}",
            payload.len(),
            expected
        )))
    } else {
        Ok(())
    }
}

pub(crate) fn f32_le(payload: &[u8]) -> Vec<f32> {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect()
}

pub(crate) fn f64_le(payload: &[u8]) -> Vec<f64> {
    payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect()
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
