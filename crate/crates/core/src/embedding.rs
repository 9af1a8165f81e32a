//! Cosine similarity of accent or speaker embeddings produced by external models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    /// Model that produced the vector; vectors from different models never compare.
    source_tag: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, source_tag: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding has no dimensions".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("embedding component {i} is not finite")));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::Validation("embedding has zero norm".into()));
        }
        Ok(Self {
            values,
            source_tag: source_tag.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// One embeddings file: `{source_tag, utterance_id, values}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub source_tag: String,
    pub utterance_id: String,
    pub values: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn vector(&self) -> Result<EmbeddingVector> {
        EmbeddingVector::new(self.values.clone(), self.source_tag.clone())
    }
}

pub fn load_embedding(json: &str) -> Result<EmbeddingRecord> {
    let rec: EmbeddingRecord =
        serde_json::from_str(json).map_err(|e| Error::parse("embedding JSON", e.to_string()))?;
    rec.vector()?;
    Ok(rec)
}

pub fn load_embedding_file(path: impl AsRef<std::path::Path>) -> Result<EmbeddingRecord> {
    load_embedding(&std::fs::read_to_string(path)?)
}

pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.source_tag != v.source_tag {
        return Err(Error::Incompatible(format!(
            "embeddings from {:?} and {:?}",
            u.source_tag, v.source_tag
        )));
    }
    if u.dim() != v.dim() {
        return Err(Error::Incompatible(format!("dimensions {} and {}", u.dim(), v.dim())));
    }
    // scale by the largest magnitude first so huge or tiny vectors do not overflow
    let su = u.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sv = v.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.values.iter().zip(&v.values) {
        let (a, b) = (a / su, b / sv);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}
