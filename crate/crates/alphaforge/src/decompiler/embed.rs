//! Knowledge library: annotated example alphas plus a local embedder for
//! similarity retrieval.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EMBED_DIM: usize = 1024;

/// One annotated example alpha from the knowledge library.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowledgeDoc {
    pub id: String,
    pub expression: String,
    pub explanation: String,
    /// Unit-normalized embedding of `expression + explanation`; computed at
    /// load time, never persisted.
    #[serde(skip)]
    pub embedding: Vec<f64>,
}

/// Text → fixed-length vector. The local default is hashed bag-of-words; a
/// remote embeddings endpoint can stand behind the same interface.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Feature-hashing bag of words: lowercased alphanumeric tokens, FNV-1a
/// bucketed counts, L2-normalized.
pub struct HashedBowEmbedder {
    dim: usize,
}

impl HashedBowEmbedder {
    pub fn new(dim: usize) -> HashedBowEmbedder {
        HashedBowEmbedder { dim }
    }
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        HashedBowEmbedder::new(DEFAULT_EMBED_DIM)
    }
}

fn fnv1a(token: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl Embedder for HashedBowEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            v[(fnv1a(token) % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn doc_text(doc: &KnowledgeDoc) -> String {
    format!("{} {}", doc.expression, doc.explanation)
}

/// Load a JSONL knowledge library and embed every doc.
pub fn load_knowledge(path: &Path, embedder: &dyn Embedder) -> Result<Vec<KnowledgeDoc>> {
    let body = std::fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: KnowledgeDoc = serde_json::from_str(line).map_err(|e| {
            Error::InvalidArgument(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        doc.embedding = embedder.embed(&doc_text(&doc));
        docs.push(doc);
    }
    Ok(docs)
}

/// Top-k docs by cosine similarity to the query; ties break by insertion
/// order. `k` larger than the library returns the whole library.
pub fn retrieve_examples(
    library: &[KnowledgeDoc],
    query: &str,
    k: usize,
    embedder: &dyn Embedder,
) -> Vec<KnowledgeDoc> {
    let q = embedder.embed(query);
    let mut scored: Vec<(usize, f64)> = library
        .iter()
        .enumerate()
        .map(|(i, d)| (i, cosine(&q, &d.embedding)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.into_iter().take(k).map(|(i, _)| library[i].clone()).collect()
}

/// Embed docs that were constructed in memory (mirrors `load_knowledge`).
pub fn embed_docs(docs: &mut [KnowledgeDoc], embedder: &dyn Embedder) {
    for d in docs.iter_mut() {
        d.embedding = embedder.embed(&doc_text(d));
    }
}
