//! Dual recommendation index.
//!
//! Builds `Y`, `X` and the embedded `X^emb`, scores candidates against a query
//! row and keeps the top `K` word and embedding neighbors of every document.
//! Full `n × n` similarity matrices are never formed.

mod matrix;
mod search;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use matrix::{
    build_binary_tf, build_embedded_corpus, build_embedded_tfidf, build_tfidf, idf_weight, SparseRow, TermDocMatrix,
};
pub use search::{rank_order, InvertedIndex};

use crate::corpus::EncodedDocument;
use crate::embedding::{Metric, Mode, NeighborFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    /// Neighborhood size of the term neighbor function.
    #[serde(rename = "M")]
    pub m: usize,
    pub mode: Mode,
    pub metric: Metric,
    pub nw: usize,
    pub ne: usize,
    /// Number of neighbors cached per document and source.
    pub cache_k: usize,
    /// Drop zero-score candidates instead of padding with them.
    pub positive_only: bool,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            m: 5,
            mode: Mode::Replacement,
            metric: Metric::Euclidean,
            nw: 10,
            ne: 2,
            cache_k: 12,
            positive_only: false,
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nw + self.ne == 0 {
            return Err(Error::InvalidConfig("nw + ne must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        if self.cache_k < self.nw.max(self.ne) {
            return Err(Error::InvalidConfig(format!(
                "cache size {} is smaller than max(nw, ne) = {}",
                self.cache_k,
                self.nw.max(self.ne)
            )));
        }
        Ok(())
    }
}

/// Which similarity a neighbor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Word,
    Embedding,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ranked {
    pub score: f64,
    /// One-based position within its source list.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEntry {
    pub doc: usize,
    pub word: Option<Ranked>,
    pub embedding: Option<Ranked>,
}

impl NeighborEntry {
    pub fn source(&self) -> Source {
        match (self.word.is_some(), self.embedding.is_some()) {
            (true, true) => Source::Both,
            (true, false) => Source::Word,
            _ => Source::Embedding,
        }
    }
}

/// Union of the word and embedding neighbor lists of one query document.
///
/// Word neighbors come first in rank order, followed by embedding neighbors
/// that are not also word neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query: usize,
    pub entries: Vec<NeighborEntry>,
    /// The query has no word row (word neighbors unavailable).
    pub word_empty: bool,
    /// The query has no embedded row (embedding neighbors unavailable).
    pub embedding_empty: bool,
}

impl NeighborList {
    fn from_lists(query: usize, word: Option<&[(usize, f64)]>, embedding: Option<&[(usize, f64)]>) -> Self {
        let mut entries: Vec<NeighborEntry> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for (k, &(doc, score)) in word.unwrap_or(&[]).iter().enumerate() {
            slot.insert(doc, entries.len());
            entries.push(NeighborEntry {
                doc,
                word: Some(Ranked { score, rank: k + 1 }),
                embedding: None,
            });
        }
        for (k, &(doc, score)) in embedding.unwrap_or(&[]).iter().enumerate() {
            let ranked = Some(Ranked { score, rank: k + 1 });
            match slot.get(&doc) {
                Some(&i) => entries[i].embedding = ranked,
                None => entries.push(NeighborEntry {
                    doc,
                    word: None,
                    embedding: ranked,
                }),
            }
        }
        Self {
            query,
            entries,
            word_empty: word.is_none(),
            embedding_empty: embedding.is_none(),
        }
    }

    /// Word neighbors in rank order.
    pub fn word(&self) -> Vec<(usize, f64)> {
        self.by_source(|e| e.word)
    }

    /// Embedding neighbors in rank order.
    pub fn embedding(&self) -> Vec<(usize, f64)> {
        self.by_source(|e| e.embedding)
    }

    fn by_source(&self, pick: impl Fn(&NeighborEntry) -> Option<Ranked>) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, Ranked)> = self.entries.iter().filter_map(|e| pick(e).map(|r| (e.doc, r))).collect();
        out.sort_by_key(|(_, r)| r.rank);
        out.into_iter().map(|(doc, r)| (doc, r.score)).collect()
    }
}

/// Cached top-`K` lists for one document; `None` marks an empty query row.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedNeighbors {
    pub word: Option<Vec<(usize, f64)>>,
    pub embedding: Option<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone)]
pub struct DualIndex {
    config: IndexConfig,
    doc_ids: Vec<String>,
    positions: HashMap<String, usize>,
    y: TermDocMatrix,
    x: TermDocMatrix,
    embedded: Vec<Vec<u32>>,
    x_emb: TermDocMatrix,
    inverted: InvertedIndex,
    cache: Vec<CachedNeighbors>,
}

impl DualIndex {
    /// Build the matrices and the neighbor cache.
    pub fn build(encoded: &[EncodedDocument], n_terms: usize, f: &NeighborFunction, config: &IndexConfig) -> Result<Self> {
        let mut index = Self::matrices(encoded, n_terms, f, config)?;
        index.cache = (0..index.n())
            .into_par_iter()
            .map(|doc| CachedNeighbors {
                word: index.topn_similar(doc, Source::Word, config.cache_k).ok(),
                embedding: index.topn_similar(doc, Source::Embedding, config.cache_k).ok(),
            })
            .collect();
        Ok(index)
    }

    /// Rebuild the matrices and attach a previously computed cache.
    pub fn with_cache(
        encoded: &[EncodedDocument],
        n_terms: usize,
        f: &NeighborFunction,
        config: &IndexConfig,
        cache: Vec<CachedNeighbors>,
    ) -> Result<Self> {
        let mut index = Self::matrices(encoded, n_terms, f, config)?;
        if cache.len() != index.n() {
            return Err(Error::InvalidConfig(format!(
                "neighbor cache has {} rows for {} documents",
                cache.len(),
                index.n()
            )));
        }
        index.cache = cache;
        Ok(index)
    }

    fn matrices(encoded: &[EncodedDocument], n_terms: usize, f: &NeighborFunction, config: &IndexConfig) -> Result<Self> {
        config.validate()?;
        let f = f.with_mode(config.mode);
        let y = build_binary_tf(encoded, n_terms)?;
        let x = build_tfidf(&y);
        let embedded = build_embedded_corpus(encoded, &f);
        let x_emb = build_embedded_tfidf(&embedded, &y);
        let inverted = InvertedIndex::new(&x);
        let doc_ids: Vec<String> = encoded.iter().map(|d| d.doc_id.clone()).collect();
        let positions = doc_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            config: config.clone(),
            doc_ids,
            positions,
            y,
            x,
            embedded,
            x_emb,
            inverted,
            cache: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn binary_matrix(&self) -> &TermDocMatrix {
        &self.y
    }

    pub fn tfidf_matrix(&self) -> &TermDocMatrix {
        &self.x
    }

    pub fn embedded_terms(&self, doc: usize) -> &[u32] {
        &self.embedded[doc]
    }

    pub fn embedded_matrix(&self) -> &TermDocMatrix {
        &self.x_emb
    }

    pub fn cache(&self) -> &[CachedNeighbors] {
        &self.cache
    }

    fn check_doc(&self, doc: usize) -> Result<()> {
        if doc < self.n() {
            Ok(())
        } else {
            Err(Error::UnknownDocument(format!("#{doc}")))
        }
    }

    /// Score every other document against the query's row of `X` or `X^emb`.
    pub fn topn_similar(&self, query: usize, source: Source, n: usize) -> Result<Vec<(usize, f64)>> {
        self.check_doc(query)?;
        let row = match source {
            Source::Word => self.x.row(query),
            Source::Embedding => self.x_emb.row(query),
            Source::Both => {
                return Err(Error::InvalidConfig("topn_similar needs a single source".into()));
            }
        };
        if row.is_empty() {
            return Err(Error::EmptyQuery(self.doc_ids[query].clone()));
        }
        Ok(self.inverted.top_n(row, Some(query), n, self.config.positive_only))
    }

    /// Dual neighbors served from the cache.
    pub fn dual_neighbors(&self, query: usize, nw: usize, ne: usize) -> Result<NeighborList> {
        self.check_doc(query)?;
        let k = self.config.cache_k;
        if nw.max(ne) > k {
            return Err(Error::ExceedsCache {
                requested: nw.max(ne),
                cached: k,
            });
        }
        let cached = &self.cache[query];
        let word = cached.word.as_ref().map(|l| &l[..nw.min(l.len())]);
        let embedding = cached.embedding.as_ref().map(|l| &l[..ne.min(l.len())]);
        let word_served = nw > 0 && word.is_some();
        let embedding_served = ne > 0 && embedding.is_some();
        if !word_served && !embedding_served {
            return Err(Error::EmptyQuery(self.doc_ids[query].clone()));
        }
        Ok(NeighborList::from_lists(query, word, embedding))
    }

    /// Dual neighbors computed directly, for counts beyond the cache.
    pub fn dual_neighbors_uncached(&self, query: usize, nw: usize, ne: usize) -> Result<NeighborList> {
        let word = self.topn_similar(query, Source::Word, nw).ok();
        let embedding = self.topn_similar(query, Source::Embedding, ne).ok();
        if (nw == 0 || word.is_none()) && (ne == 0 || embedding.is_none()) {
            return Err(Error::EmptyQuery(self.doc_ids[query].clone()));
        }
        Ok(NeighborList::from_lists(query, word.as_deref(), embedding.as_deref()))
    }

    /// Rank documents against a virtual document made of `term_ids`.
    pub fn search_terms(&self, term_ids: &[u32], n: usize) -> Result<Vec<(usize, f64)>> {
        let mut terms = term_ids.to_vec();
        terms.sort_unstable();
        terms.dedup();
        let row = self.x.weigh_terms(&terms);
        if row.is_empty() {
            return Err(Error::EmptyQuery("<search query>".into()));
        }
        Ok(self.inverted.top_n(&row, None, n, self.config.positive_only))
    }

    /// Write the neighbor cache as JSON lines: a config header, then one row per document.
    pub fn write_cache<W: Write>(&self, mut out: W) -> Result<()> {
        let header = CacheHeader {
            config: self.config.clone(),
            n: self.n(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for (doc, cached) in self.cache.iter().enumerate() {
            out.write_all(b"{\"id\":")?;
            serde_json::to_writer(&mut out, &self.doc_ids[doc])?;
            out.write_all(b",\"word\":")?;
            self.write_list(&mut out, cached.word.as_deref())?;
            out.write_all(b",\"emb\":")?;
            self.write_list(&mut out, cached.embedding.as_deref())?;
            out.write_all(b"}\n")?;
        }
        Ok(())
    }

    fn write_list<W: Write>(&self, out: &mut W, list: Option<&[(usize, f64)]>) -> Result<()> {
        let Some(list) = list else {
            out.write_all(b"null")?;
            return Ok(());
        };
        out.write_all(b"[")?;
        for (k, &(doc, score)) in list.iter().enumerate() {
            if k > 0 {
                out.write_all(b",")?;
            }
            out.write_all(b"[")?;
            serde_json::to_writer(&mut *out, &self.doc_ids[doc])?;
            write!(out, ",{}]", format_score(score))?;
        }
        out.write_all(b"]")?;
        Ok(())
    }
}

/// Score with 17 significant digits, exact under round trip.
pub fn format_score(score: f64) -> String {
    format!("{score:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub config: IndexConfig,
    pub n: usize,
}

/// Parse a cache written by [`DualIndex::write_cache`]; `doc_ids` gives corpus order.
pub fn read_cache<R: BufRead>(source: R, doc_ids: &[String]) -> Result<(CacheHeader, Vec<CachedNeighbors>)> {
    let positions: HashMap<&str, usize> = doc_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut lines = source.lines();
    let header: CacheHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => {
            return Err(Error::MalformedRow {
                row: 1,
                message: "missing cache header".into(),
            })
        }
    };
    let mut rows = Vec::with_capacity(header.n);
    for (i, line) in lines.enumerate() {
        let row_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedRow { row: row_no, message };
        let row: CacheRow = serde_json::from_str(&line)?;
        if doc_ids.get(rows.len()) != Some(&row.id) {
            return Err(malformed(format!("unexpected document {:?}", row.id)));
        }
        let resolve = |list: Option<Vec<(String, f64)>>| -> Result<Option<Vec<(usize, f64)>>> {
            list.map(|l| {
                l.into_iter()
                    .map(|(id, score)| {
                        positions
                            .get(id.as_str())
                            .map(|&p| (p, score))
                            .ok_or_else(|| malformed(format!("unknown neighbor {id:?}")))
                    })
                    .collect()
            })
            .transpose()
        };
        rows.push(CachedNeighbors {
            word: resolve(row.word)?,
            embedding: resolve(row.emb)?,
        });
    }
    if rows.len() != header.n || rows.len() != doc_ids.len() {
        return Err(Error::MalformedRow {
            row: rows.len() + 1,
            message: format!("cache has {} rows, expected {}", rows.len(), doc_ids.len()),
        });
    }
    Ok((header, rows))
}

#[derive(Deserialize)]
struct CacheRow {
    id: String,
    word: Option<Vec<(String, f64)>>,
    emb: Option<Vec<(String, f64)>>,
}
