use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{Embedding, VectorIndex};
use crate::corpus::Chunk;
use crate::modelio::{Embedder, ServiceError};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Texts per embedding request.
    pub batch_size: usize,
    /// Concurrent embedding requests.
    pub parallelism: usize,
    /// Scale vectors to unit length (cosine ranking).
    pub normalize: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            batch_size: 32,
            parallelism: 1,
            normalize: false,
        }
    }
}

type BatchResult = std::result::Result<Vec<Vec<f64>>, ServiceError>;

/// Embeds every chunk and builds the index in chunk order.
///
/// Batches may complete in any order; they are reassembled by position. On
/// failure the error names the first failing chunk in chunk order.
pub fn build_index<T: Scalar>(
    chunks: &[Chunk],
    embedder: &dyn Embedder,
    opts: BuildOptions,
) -> Result<VectorIndex<T>> {
    if let Some(c) = chunks.iter().find(|c| c.text.is_empty()) {
        return Err(Error::invalid(format!("chunk `{}` has empty text", c.chunk_id)));
    }
    let batch_size = opts.batch_size.max(1);
    let batches: Vec<&[Chunk]> = chunks.chunks(batch_size).collect();
    let results: Mutex<Vec<Option<BatchResult>>> = Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = opts.parallelism.clamp(1, batches.len().max(1));

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::Relaxed);
                let Some(batch) = batches.get(b) else { break };
                let texts: Vec<String> = batch.iter().map(|c| c.text.clone()).collect();
                let out = embedder.embed(&texts).and_then(|vs| {
                    if vs.len() == texts.len() {
                        Ok(vs)
                    } else {
                        Err(ServiceError::InvalidRequest(format!(
                            "embedder returned {} vectors for {} texts",
                            vs.len(),
                            texts.len()
                        )))
                    }
                });
                results.lock().unwrap_or_else(|e| e.into_inner())[b] = Some(out);
            });
        }
    });

    let results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    let mut entries = Vec::with_capacity(chunks.len());
    let mut dim: Option<usize> = None;
    for (b, res) in results.into_iter().enumerate() {
        let start = b * batch_size;
        let vectors = match res.expect("every batch visited") {
            Ok(v) => v,
            Err(e) => {
                let offset = e.text_index().unwrap_or(0);
                return Err(Error::EmbedChunk {
                    chunk_id: chunks[start + offset].chunk_id.clone(),
                    source: e,
                });
            }
        };
        for (i, v) in vectors.into_iter().enumerate() {
            let chunk = &chunks[start + i];
            let expected = *dim.get_or_insert(v.len());
            if v.len() != expected {
                return Err(Error::EmbedChunk {
                    chunk_id: chunk.chunk_id.clone(),
                    source: ServiceError::Dimension {
                        expected,
                        actual: v.len(),
                    },
                });
            }
            let mut e = Embedding::<T>::from_f64(&v).map_err(|err| Error::EmbedChunk {
                chunk_id: chunk.chunk_id.clone(),
                source: ServiceError::InvalidRequest(err.to_string()),
            })?;
            if opts.normalize {
                e = e.normalized();
            }
            entries.push((chunk.chunk_id.clone(), e));
        }
    }
    let dim = dim.unwrap_or(1);
    VectorIndex::from_entries(embedder.id(), dim, entries, opts.normalize)
}

/// Embeds a retrieval query, applying the optional instruction prefix.
pub fn embed_query<T: Scalar>(
    embedder: &dyn Embedder,
    text: &str,
    prefix: &str,
    normalize: bool,
) -> Result<Embedding<T>> {
    let input = format!("{prefix}{text}");
    let mut out = embedder.embed(std::slice::from_ref(&input))?;
    let v = out
        .pop()
        .ok_or_else(|| Error::invalid("embedder returned no vector for query"))?;
    let e = Embedding::from_f64(&v)?;
    Ok(if normalize { e.normalized() } else { e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Origin, Topic};
    use crate::modelio::mock::MockEmbedder;

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            text: text.into(),
            token_count: 1,
            origin: Origin {
                source_id: "s".into(),
                section: 0,
            },
            topic: Topic::Anatomy,
        }
    }

    struct Failing;

    impl Embedder for Failing {
        fn id(&self) -> &str {
            "failing"
        }
        fn embed(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, ServiceError> {
            if let Some(i) = texts.iter().position(|t| t == "bad") {
                return Err(ServiceError::InvalidRequest("boom".into()).at_text(i));
            }
            Ok(texts.iter().map(|_| vec![1.0, 0.0]).collect())
        }
    }

    struct Ragged;

    impl Embedder for Ragged {
        fn id(&self) -> &str {
            "ragged"
        }
        fn embed(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, ServiceError> {
            Ok(texts.iter().map(|t| vec![1.0; t.len()]).collect())
        }
    }

    #[test]
    fn empty_and_small() {
        let e = MockEmbedder::new(8, 0);
        let idx: VectorIndex<f64> = build_index(&[], &e, BuildOptions::default()).unwrap();
        assert!(idx.is_empty());
        let chunks = vec![chunk("a", "x y"), chunk("b", "z"), chunk("c", "w")];
        let idx: VectorIndex<f64> = build_index(&chunks, &e, BuildOptions::default()).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.dim(), 8);
        assert_eq!(idx.ids(), ["a", "b", "c"]);
    }

    #[test]
    fn failing_chunk_reported() {
        let chunks = vec![chunk("a", "ok"), chunk("b", "ok"), chunk("c", "bad"), chunk("d", "ok")];
        let opts = BuildOptions {
            batch_size: 2,
            parallelism: 2,
            normalize: false,
        };
        let err = build_index::<f64>(&chunks, &Failing, opts).unwrap_err();
        assert!(matches!(err, Error::EmbedChunk { ref chunk_id, .. } if chunk_id == "c"), "{err}");
    }

    #[test]
    fn dimension_mismatch_reported() {
        let chunks = vec![chunk("a", "xx"), chunk("b", "yyy")];
        let err = build_index::<f64>(&chunks, &Ragged, BuildOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmbedChunk { ref chunk_id, .. } if chunk_id == "b"));
    }

    #[test]
    fn parallel_build_matches_serial() {
        let e = MockEmbedder::new(16, 5);
        let chunks: Vec<_> = (0..50)
            .map(|i| chunk(&format!("c{i}"), &format!("text number {i} about topic {}", i % 7)))
            .collect();
        let serial: VectorIndex<f64> = build_index(&chunks, &e, BuildOptions::default()).unwrap();
        let par: VectorIndex<f64> = build_index(
            &chunks,
            &e,
            BuildOptions {
                batch_size: 3,
                parallelism: 8,
                normalize: false,
            },
        )
        .unwrap();
        assert_eq!(serial, par);
    }
}
