use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embedder, MemoryError};
use crate::scene::{Action, DatasetTag};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Correct,
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub record_id: u64,
    pub scene_text: String,
    pub embedding: Vec<f64>,
    pub risk_text: String,
    pub reasoning: String,
    pub action: Action,
    pub outcome: Outcome,
    pub reflection: Option<String>,
    /// Caller-supplied timestamp, seconds.
    pub created_at: u64,
}

/// A record before the store assigns its id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewRecord {
    pub scene_text: String,
    pub embedding: Vec<f64>,
    pub risk_text: String,
    pub reasoning: String,
    pub action: Action,
    pub outcome: Outcome,
    pub reflection: Option<String>,
    pub created_at: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u64,
    dimension: usize,
    embedder_tag: String,
    record_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dimension: usize,
    embedder_tag: String,
    records: Vec<MemoryRecord>,
    next_id: u64,
}

fn valid_norm(v: &[f64]) -> bool {
    let n: f64 = v.iter().map(|x| x * x).sum();
    n.is_finite() && n > 0.0
}

impl VectorStore {
    pub fn new(dimension: usize, embedder_tag: impl Into<String>) -> Self {
        VectorStore {
            dimension,
            embedder_tag: embedder_tag.into(),
            records: Vec::new(),
            next_id: 1,
        }
    }

    pub fn for_embedder(embedder: &dyn Embedder) -> Self {
        Self::new(embedder.dimension(), embedder.tag())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn embedder_tag(&self) -> &str {
        &self.embedder_tag
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn get(&self, record_id: u64) -> Option<&MemoryRecord> {
        self.records
            .binary_search_by_key(&record_id, |r| r.record_id)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Appends a record and returns its id.
    pub fn update(&mut self, record: NewRecord) -> Result<u64, MemoryError> {
        if record.embedding.len() != self.dimension {
            return Err(MemoryError::DimensionMismatch {
                expected: self.dimension,
                got: record.embedding.len(),
            });
        }
        if !valid_norm(&record.embedding) {
            return Err(MemoryError::InvalidEmbedding);
        }
        let record_id = self.next_id;
        self.next_id += 1;
        self.records.push(MemoryRecord {
            record_id,
            scene_text: record.scene_text,
            embedding: record.embedding,
            risk_text: record.risk_text,
            reasoning: record.reasoning,
            action: record.action,
            outcome: record.outcome,
            reflection: record.reflection,
            created_at: record.created_at,
        });
        Ok(record_id)
    }

    /// Top-`n` records by cosine similarity to `query`, descending, ties by
    /// ascending record id.
    pub fn retrieve_by_vector(&self, query: &[f64], n: usize) -> Result<Vec<(&MemoryRecord, f64)>, MemoryError> {
        if query.len() != self.dimension {
            return Err(MemoryError::DimensionMismatch {
                expected: self.dimension,
                got: query.len(),
            });
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut scored: Vec<(&MemoryRecord, f64)> =
            self.records.iter().map(|r| (r, super::cosine(query, &r.embedding))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.record_id.cmp(&b.0.record_id)));
        scored.truncate(n);
        Ok(scored)
    }

    pub fn retrieve(
        &self,
        embedder: &dyn Embedder,
        query_text: &str,
        n: usize,
    ) -> Result<Vec<(&MemoryRecord, f64)>, MemoryError> {
        if embedder.tag() != self.embedder_tag {
            return Err(MemoryError::EmbedderMismatch {
                store: self.embedder_tag.clone(),
                query: embedder.tag(),
            });
        }
        if n == 0 || self.records.is_empty() {
            return Ok(Vec::new());
        }
        self.retrieve_by_vector(&embedder.embed(query_text)?, n)
    }

    /// JSON-lines: a header line, then one record per line.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), MemoryError> {
        let header = Header {
            schema_version: SCHEMA_VERSION,
            dimension: self.dimension,
            embedder_tag: self.embedder_tag.clone(),
            record_count: self.records.len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MemoryError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: std::io::Read>(reader: R) -> Result<Self, MemoryError> {
        let corrupt = |m: String| MemoryError::CorruptStore(m);
        let mut lines = BufReader::new(reader).lines();
        let first = lines.next().ok_or_else(|| corrupt("empty file".into()))??;
        let value: serde_json::Value =
            serde_json::from_str(&first).map_err(|e| corrupt(format!("header: {e}")))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt("header lacks schema_version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(MemoryError::SchemaVersionMismatch {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let header: Header = serde_json::from_value(value).map_err(|e| corrupt(format!("header: {e}")))?;
        let mut store = VectorStore::new(header.dimension, header.embedder_tag);
        let mut ids = BTreeSet::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let lineno = k + 2;
            if line.is_empty() {
                return Err(corrupt(format!("line {lineno}: empty line")));
            }
            let r: MemoryRecord =
                serde_json::from_str(&line).map_err(|e| corrupt(format!("line {lineno}: {e}")))?;
            if r.embedding.len() != store.dimension || !valid_norm(&r.embedding) {
                return Err(corrupt(format!("line {lineno}: bad embedding")));
            }
            if store.records.last().is_some_and(|last| last.record_id >= r.record_id) || !ids.insert(r.record_id) {
                return Err(corrupt(format!("line {lineno}: record ids not strictly increasing")));
            }
            store.next_id = r.record_id + 1;
            store.records.push(r);
        }
        if store.records.len() != header.record_count {
            return Err(corrupt(format!(
                "header announces {} records, found {}",
                header.record_count,
                store.records.len()
            )));
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MemoryError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// A hand-written experience used to initialize memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub tag: DatasetTag,
    pub scene_text: String,
    #[serde(default)]
    pub risk_text: String,
    pub reasoning: String,
    pub action: Action,
}

const EXEMPLARS_JSON: &str = include_str!("../../data/exemplars.json");

/// The bundled exemplars of one scenario family: three highway, three
/// intersection and two roundabout records.
pub fn bundled_exemplars(tag: DatasetTag) -> Vec<Exemplar> {
    let all: Vec<Exemplar> = serde_json::from_str(EXEMPLARS_JSON).expect("bundled exemplars parse");
    all.into_iter().filter(|e| e.tag == tag).collect()
}

/// Inserts the exemplars with outcome `correct`; returns the count.
pub fn seed_memory(
    store: &mut VectorStore,
    embedder: &dyn Embedder,
    exemplars: &[Exemplar],
) -> Result<usize, MemoryError> {
    for e in exemplars {
        store.update(NewRecord {
            scene_text: e.scene_text.clone(),
            embedding: embedder.embed(&e.scene_text)?,
            risk_text: e.risk_text.clone(),
            reasoning: e.reasoning.clone(),
            action: e.action,
            outcome: Outcome::Correct,
            reflection: None,
            created_at: 0,
        })?;
    }
    Ok(exemplars.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::HashEmbedder;

    fn record(e: &HashEmbedder, text: &str) -> NewRecord {
        NewRecord {
            scene_text: text.into(),
            embedding: e.embed(text).unwrap(),
            risk_text: String::new(),
            reasoning: "r".into(),
            action: Action::Idle,
            outcome: Outcome::Correct,
            reflection: None,
            created_at: 0,
        }
    }

    #[test]
    fn insert_and_self_retrieve() {
        let e = HashEmbedder::default();
        let mut s = VectorStore::for_embedder(&e);
        s.update(record(&e, "slow truck ahead")).unwrap();
        let id = s.update(record(&e, "overtaker in the left lane")).unwrap();
        assert_eq!(s.len(), 2);
        let hits = s.retrieve(&e, "overtaker in the left lane", 1).unwrap();
        assert_eq!(hits[0].0.record_id, id);
        assert!((hits[0].1 - 1.0).abs() < 1e-9);
        assert!(s.retrieve(&e, "anything", 0).unwrap().is_empty());
    }

    #[test]
    fn ties_by_ascending_id() {
        let e = HashEmbedder::default();
        let mut s = VectorStore::for_embedder(&e);
        for _ in 0..3 {
            s.update(record(&e, "same text")).unwrap();
        }
        let ids: Vec<u64> = s.retrieve(&e, "same text", 3).unwrap().iter().map(|h| h.0.record_id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn dimension_mismatch() {
        let e = HashEmbedder::default();
        let mut s = VectorStore::new(8, e.tag());
        assert!(matches!(s.update(record(&e, "x")), Err(MemoryError::DimensionMismatch { expected: 8, got: 256 })));
        assert!(matches!(s.retrieve_by_vector(&[1.0; 3], 1), Err(MemoryError::DimensionMismatch { .. })));
    }

    #[test]
    fn embedder_mismatch() {
        let s = VectorStore::new(256, "other");
        assert!(matches!(
            s.retrieve(&HashEmbedder::default(), "x", 1),
            Err(MemoryError::EmbedderMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_and_corruption() {
        let e = HashEmbedder::default();
        let mut s = VectorStore::for_embedder(&e);
        seed_memory(&mut s, &e, &bundled_exemplars(DatasetTag::Highway)).unwrap();
        let mut bytes = Vec::new();
        s.write_to(&mut bytes).unwrap();
        let back = VectorStore::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, s);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, bytes);

        let truncated = &bytes[..bytes.len() - 40];
        assert!(matches!(VectorStore::read_from(truncated), Err(MemoryError::CorruptStore(_))));

        let text = String::from_utf8(bytes).unwrap().replacen("\"schema_version\":1", "\"schema_version\":2", 1);
        assert!(matches!(
            VectorStore::read_from(text.as_bytes()),
            Err(MemoryError::SchemaVersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn bundled_pack_sizes() {
        assert_eq!(bundled_exemplars(DatasetTag::Highway).len(), 3);
        assert_eq!(bundled_exemplars(DatasetTag::Intersection).len(), 3);
        assert_eq!(bundled_exemplars(DatasetTag::Roundabout).len(), 2);
    }

    #[test]
    fn ids_continue_after_load() {
        let e = HashEmbedder::default();
        let mut s = VectorStore::for_embedder(&e);
        s.update(record(&e, "a")).unwrap();
        let mut bytes = Vec::new();
        s.write_to(&mut bytes).unwrap();
        let mut back = VectorStore::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.update(record(&e, "b")).unwrap(), 2);
    }
}
