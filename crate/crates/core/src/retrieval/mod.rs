//! Exact dense retrieval: a full-scan dot-product index over chunk
//! embeddings and construction of the augmented query.

mod build;
mod persist;

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

pub use build::{build_index, embed_query, BuildOptions};
pub use persist::{dump, read_index, write_index, INDEX_MAGIC, INDEX_VERSION};

use crate::corpus::ChunkLookup;
use crate::scalar::dot_f64;
use crate::{Error, Result, Scalar};

/// Separator between retrieved documents and before the question.
pub const DOC_SEPARATOR: &str = "\n\n";

/// Dense vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    vector: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(vector: Vec<T>) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::invalid("embedding has no components"));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("embedding has a non-finite component"));
        }
        Ok(Self { vector })
    }

    pub fn from_f64(vector: &[f64]) -> Result<Self> {
        Self::new(vector.iter().map(|&x| T::from_f64_lossy(x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.vector
    }

    pub fn norm(&self) -> f64 {
        dot_f64(&self.vector, &self.vector).sqrt()
    }

    /// Scales to unit length; the zero vector is left as is.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for x in &mut self.vector {
                *x = T::from_f64_lossy(x.as_f64() / n);
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk_id: String,
    pub score: f64,
}

/// Ranked hits, best first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<Hit>,
    pub k: usize,
}

impl RetrievalResult {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.chunk_id.as_str())
    }
}

/// Immutable exact-search index.
///
/// Vectors are stored contiguously in insertion order. Scores are dot
/// products accumulated in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<T> {
    ids: Vec<String>,
    data: Vec<T>,
    dim: usize,
    embedder_id: String,
    normalized: bool,
}

#[derive(Debug, Clone, Copy)]
struct Ranked {
    score: f64,
    pos: usize,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    /// Greater means ranked earlier: higher score, then lower position.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.pos.cmp(&self.pos))
    }
}

impl<T: Scalar> VectorIndex<T> {
    /// Builds from `(chunk_id, embedding)` pairs in the given order.
    pub fn from_entries(
        embedder_id: impl Into<String>,
        dim: usize,
        entries: Vec<(String, Embedding<T>)>,
        normalized: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("index dimension must be positive"));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        let mut ids = Vec::with_capacity(entries.len());
        let mut data = Vec::with_capacity(entries.len() * dim);
        for (id, emb) in entries {
            if emb.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: emb.dim(),
                });
            }
            if !seen.insert(id.clone()) {
                return Err(Error::invalid(format!("duplicate chunk id `{id}` in index")));
            }
            ids.push(id);
            data.extend_from_slice(emb.as_slice());
        }
        Ok(Self {
            ids,
            data,
            dim,
            embedder_id: embedder_id.into(),
            normalized,
        })
    }

    pub(crate) fn from_raw(
        embedder_id: String,
        dim: usize,
        ids: Vec<String>,
        data: Vec<T>,
        normalized: bool,
    ) -> Self {
        debug_assert_eq!(ids.len() * dim, data.len());
        Self {
            ids,
            data,
            dim,
            embedder_id,
            normalized,
        }
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

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, pos: usize) -> &[T] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks_exact(self.dim))
    }

    /// The `k` entries with the largest dot product against `query`, best
    /// first. Equal scores rank by insertion order.
    pub fn top_k(&self, query: &Embedding<T>, k: usize) -> Result<RetrievalResult> {
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        if k == 0 {
            return Ok(RetrievalResult { hits: Vec::new(), k });
        }
        let q = query.as_slice();
        let mut heap: BinaryHeap<Reverse<Ranked>> = BinaryHeap::with_capacity(k + 1);
        for (pos, v) in self.data.chunks_exact(self.dim).enumerate() {
            let cand = Ranked {
                score: dot_f64(q, v),
                pos,
            };
            if heap.len() < k {
                heap.push(Reverse(cand));
            } else if let Some(Reverse(worst)) = heap.peek() {
                if cand > *worst {
                    heap.pop();
                    heap.push(Reverse(cand));
                }
            }
        }
        let mut ranked: Vec<Ranked> = heap.into_iter().map(|Reverse(r)| r).collect();
        ranked.sort_unstable_by(|a, b| b.cmp(a));
        Ok(RetrievalResult {
            hits: ranked
                .into_iter()
                .map(|r| Hit {
                    chunk_id: self.ids[r.pos].clone(),
                    score: r.score,
                })
                .collect(),
            k,
        })
    }
}

/// Prepends the retrieved chunk texts to `question`, best hit first.
///
/// Empty chunk texts are skipped; with no usable hits the question is
/// returned unchanged.
pub fn augment_query(
    question: &str,
    hits: &RetrievalResult,
    lookup: &dyn ChunkLookup,
) -> Result<String> {
    let mut parts: Vec<&str> = Vec::with_capacity(hits.hits.len() + 1);
    for h in &hits.hits {
        let text = lookup
            .chunk_text(&h.chunk_id)
            .ok_or_else(|| Error::UnknownChunk(h.chunk_id.clone()))?;
        if !text.is_empty() {
            parts.push(text);
        }
    }
    parts.push(question);
    Ok(parts.join(DOC_SEPARATOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn emb(v: &[f64]) -> Embedding<f64> {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn index(vs: &[&[f64]]) -> VectorIndex<f64> {
        let entries = vs
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("c{i}"), emb(v)))
            .collect();
        VectorIndex::from_entries("test", vs[0].len(), entries, false).unwrap()
    }

    #[test]
    fn unit_vector_found() {
        let idx = index(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let r = idx.top_k(&emb(&[0.0, 1.0, 0.0]), 1).unwrap();
        assert_eq!(r.hits, vec![Hit { chunk_id: "c1".into(), score: 1.0 }]);
    }

    #[test]
    fn k_zero_and_k_large() {
        let idx = index(&[&[1.0], &[3.0], &[2.0]]);
        assert!(idx.top_k(&emb(&[1.0]), 0).unwrap().hits.is_empty());
        let all: Vec<_> = idx
            .top_k(&emb(&[1.0]), 10)
            .unwrap()
            .ids()
            .map(str::to_string)
            .collect();
        assert_eq!(all, vec!["c1", "c2", "c0"]);
    }

    #[test]
    fn ties_prefer_lower_insertion_index() {
        let idx = index(&[&[1.0, 0.0], &[0.5, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        let ids: Vec<_> = idx
            .top_k(&emb(&[1.0, 0.0]), 2)
            .unwrap()
            .ids()
            .map(str::to_string)
            .collect();
        assert_eq!(ids, vec!["c0", "c2"]);
    }

    #[test]
    fn signed_zero_scores_tie() {
        let idx = index(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let r = idx.top_k(&emb(&[0.0, 1.0]), 2).unwrap();
        let ids: Vec<_> = r.ids().collect();
        assert_eq!(ids, vec!["c0", "c1"]);
    }

    #[test]
    fn dim_mismatch() {
        let idx = index(&[&[1.0, 0.0]]);
        assert!(matches!(
            idx.top_k(&emb(&[1.0]), 1),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn rejects_duplicates_and_bad_vectors() {
        let dup = vec![("a".to_string(), emb(&[1.0])), ("a".to_string(), emb(&[2.0]))];
        assert!(VectorIndex::from_entries("t", 1, dup, false).is_err());
        assert!(Embedding::<f64>::new(vec![f64::INFINITY]).is_err());
        assert!(Embedding::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn f32_storage_scores_in_double() {
        let e = |v: &[f32]| Embedding::<f32>::new(v.to_vec()).unwrap();
        let idx = VectorIndex::from_entries(
            "t",
            2,
            vec![("a".into(), e(&[0.1, 0.2])), ("b".into(), e(&[0.3, 0.1]))],
            false,
        )
        .unwrap();
        let r = idx.top_k(&e(&[1.0, 1.0]), 2).unwrap();
        assert_eq!(r.hits[0].chunk_id, "b");
        assert_eq!(r.hits[0].score, 0.3f32 as f64 + 0.1f32 as f64);
    }

    fn lookup() -> HashMap<String, String> {
        [("d1", "first doc"), ("d2", "second doc"), ("e", "")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    fn hits(ids: &[(&str, f64)]) -> RetrievalResult {
        RetrievalResult {
            hits: ids
                .iter()
                .map(|(id, s)| Hit { chunk_id: id.to_string(), score: *s })
                .collect(),
            k: ids.len(),
        }
    }

    #[test]
    fn augment_identity_and_order() {
        let l = lookup();
        assert_eq!(augment_query("Q?", &RetrievalResult::empty(), &l).unwrap(), "Q?");
        assert_eq!(
            augment_query("Q?", &hits(&[("d1", 0.9), ("d2", 0.5)]), &l).unwrap(),
            "first doc\n\nsecond doc\n\nQ?"
        );
        assert_eq!(augment_query("Q?", &hits(&[("e", 0.3)]), &l).unwrap(), "Q?");
        assert!(matches!(
            augment_query("Q?", &hits(&[("zz", 0.3)]), &l),
            Err(Error::UnknownChunk(_))
        ));
    }
}
