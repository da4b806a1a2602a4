//! Pretrained per-field embedding vectors and their on-disk format.

mod client;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binfmt::{self, EMBEDDINGS_MAGIC};
use crate::corpus::ConstructSet;
use crate::{Error, Result};

pub use client::{fetch_embeddings, fetch_embeddings_with, EmbeddingTransport, EmbeddingsEndpointConfig};
#[cfg(feature = "http")]
pub use client::HttpTransport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Name,
    Definition,
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Field::Name => "name",
            Field::Definition => "definition",
        })
    }
}

/// Id-aligned dense f32 vectors for one text field.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    field: Field,
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major data, rejecting zero or non-finite rows.
    pub fn new(field: Field, ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("embedding dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Domain(format!(
                "{} values do not fill {} rows of dimension {dim}",
                data.len(),
                ids.len()
            )));
        }
        for (id, row) in ids.iter().zip(data.chunks_exact(dim)) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("embedding for {id:?} is not finite")));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::Domain(format!("embedding for {id:?} is all zeros")));
            }
        }
        Ok(Self {
            field,
            ids,
            dim,
            data,
        })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, pos: usize) -> &[f32] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Rows at `positions`, in the given order.
    pub fn select(&self, positions: &[usize]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(positions.len() * self.dim);
        let mut ids = Vec::with_capacity(positions.len());
        for &p in positions {
            ids.push(self.ids[p].clone());
            data.extend_from_slice(self.row(p));
        }
        EmbeddingMatrix {
            field: self.field,
            ids,
            dim: self.dim,
            data,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    field: Field,
    count: usize,
    dim: usize,
    ids: Vec<String>,
}

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let header = Header {
        field: m.field,
        count: m.ids.len(),
        dim: m.dim,
        ids: m.ids.clone(),
    };
    let mut payload = Vec::with_capacity(m.data.len() * 4);
    for v in &m.data {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    binfmt::encode(EMBEDDINGS_MAGIC, &header, &payload)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let (header, payload): (Header, _) = binfmt::decode(EMBEDDINGS_MAGIC, bytes)?;
    if header.ids.len() != header.count {
        return Err(Error::Header(format!(
            "count is {} but {} ids are listed",
            header.count,
            header.ids.len()
        )));
    }
    binfmt::expect_payload(payload, header.count * header.dim * 4)?;
    EmbeddingMatrix::new(header.field, header.ids, header.dim, binfmt::f32_le(payload))
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    binfmt::write_file(path.as_ref(), &encode_embeddings(m))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    decode_embeddings(&binfmt::read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}

/// Checks both matrices cover exactly the set's ids, in set order.
pub fn align(a: &EmbeddingMatrix, b: &EmbeddingMatrix, set: &ConstructSet) -> Result<()> {
    for m in [a, b] {
        for (expected, got) in set.ids().zip(m.ids()) {
            if expected != got {
                let offending = if set.position(got).is_none() { got } else { expected };
                return Err(Error::Coverage {
                    id: offending.to_string(),
                    problem: "is misaligned between the embeddings and the construct set",
                });
            }
        }
        if m.len() < set.len() {
            return Err(Error::Coverage {
                id: set.get(m.len()).expect("in range").id.clone(),
                problem: "is missing from the embeddings",
            });
        }
        if m.len() > set.len() {
            return Err(Error::Coverage {
                id: m.ids()[set.len()].clone(),
                problem: "is in the embeddings but not in the construct set",
            });
        }
    }
    Ok(())
}
