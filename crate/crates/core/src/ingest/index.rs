use std::cmp::Ordering;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::chunk::Chunk;
use super::{IngestError, Result};
use crate::par::Exec;
use crate::providers::Embedder;
use crate::text::fnv1a64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    #[serde(flatten)]
    pub chunk: Chunk,
    /// Unit L2 norm.
    pub vector: Vec<f64>,
}

/// Immutable per-document vector index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkIndex {
    entries: Vec<IndexEntry>,
    dimensionality: usize,
}

fn normalize(mut v: Vec<f64>) -> std::result::Result<Vec<f64>, String> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err("embedding has zero or non-finite norm".into());
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

pub fn build_index(chunks: Vec<Chunk>, embedder: &dyn Embedder) -> Result<ChunkIndex> {
    build_index_with(chunks, embedder, Exec::default())
}

/// Embeds every chunk (in parallel under [`Exec::Parallel`]) and normalizes
/// the vectors.
pub fn build_index_with(chunks: Vec<Chunk>, embedder: &dyn Embedder, exec: Exec) -> Result<ChunkIndex> {
    if chunks.is_empty() {
        return Err(IngestError::InvalidParams("cannot index zero chunks".into()));
    }
    let vectors = exec.map(&chunks, |c| {
        embedder
            .embed(&c.text)
            .map_err(|e| e.to_string())
            .and_then(normalize)
    });
    let dimensionality = embedder.dimensionality();
    let mut entries = Vec::with_capacity(chunks.len());
    for (chunk, vector) in chunks.into_iter().zip(vectors) {
        let vector = vector.map_err(IngestError::EmbedderFailure)?;
        if vector.len() != dimensionality {
            return Err(IngestError::EmbedderFailure(format!(
                "expected {dimensionality} dimensions, got {}",
                vector.len()
            )));
        }
        entries.push(IndexEntry { chunk, vector });
    }
    Ok(ChunkIndex {
        entries,
        dimensionality,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Descending score, then (doc_id, index) ascending.
fn rank(a: &(f64, &IndexEntry), b: &(f64, &IndexEntry)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| a.1.chunk.doc_id.cmp(&b.1.chunk.doc_id))
        .then_with(|| a.1.chunk.index.cmp(&b.1.chunk.index))
}

impl ChunkIndex {
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dimensionality(&self) -> usize {
        self.dimensionality
    }

    pub fn retrieve(&self, query: &str, k: usize, embedder: &dyn Embedder) -> Result<Vec<Chunk>> {
        self.retrieve_with(query, k, embedder, Exec::default())
    }

    /// Top-`k` chunks by cosine similarity to `query`.
    pub fn retrieve_with(
        &self,
        query: &str,
        k: usize,
        embedder: &dyn Embedder,
        exec: Exec,
    ) -> Result<Vec<Chunk>> {
        if k == 0 {
            return Err(IngestError::InvalidParams("k must be at least 1".into()));
        }
        if self.entries.is_empty() {
            return Err(IngestError::EmptyIndex);
        }
        let q = embedder
            .embed(query)
            .map_err(|e| e.to_string())
            .and_then(normalize)
            .map_err(IngestError::EmbedderFailure)?;
        let scores = exec.map(&self.entries, |e| dot(&e.vector, &q));
        let mut scored: Vec<(f64, &IndexEntry)> = scores.into_iter().zip(&self.entries).collect();
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_by(rank);
        Ok(scored.into_iter().map(|(_, e)| e.chunk.clone()).collect())
    }
}

/// On-disk cache of chunk indexes, one JSONL file per (embedder, document).
#[derive(Debug, Clone)]
pub struct ChunkCache {
    dir: PathBuf,
}

fn file_safe(s: &str) -> String {
    let clean: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    format!("{clean}-{:08x}", fnv1a64(s.as_bytes()) as u32)
}

impl ChunkCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ChunkCache { dir: dir.into() }
    }

    fn path(&self, doc_id: &str, embedder_id: &str) -> PathBuf {
        self.dir
            .join(file_safe(embedder_id))
            .join(format!("{}.jsonl", file_safe(doc_id)))
    }

    pub fn load(&self, doc_id: &str, embedder: &dyn Embedder) -> Result<Option<ChunkIndex>> {
        let path = self.path(doc_id, embedder.id());
        if !path.exists() {
            return Ok(None);
        }
        let mut entries = Vec::new();
        for line in BufReader::new(File::open(&path)?).lines() {
            let line = line?;
            match serde_json::from_str::<IndexEntry>(&line) {
                Ok(e) => entries.push(e),
                // a damaged cache is a miss, not a failure
                Err(_) => return Ok(None),
            }
        }
        let dimensionality = embedder.dimensionality();
        if entries.is_empty() || entries.iter().any(|e| e.vector.len() != dimensionality) {
            return Ok(None);
        }
        Ok(Some(ChunkIndex {
            entries,
            dimensionality,
        }))
    }

    pub fn store(&self, index: &ChunkIndex, embedder: &dyn Embedder) -> Result<()> {
        let Some(first) = index.entries.first() else {
            return Ok(());
        };
        let path = self.path(&first.chunk.doc_id, embedder.id());
        write_lines(&path, &index.entries)
    }
}

fn write_lines(path: &Path, entries: &[IndexEntry]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp)?);
    for e in entries {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    drop(w);
    fs::rename(tmp, path)?;
    Ok(())
}
