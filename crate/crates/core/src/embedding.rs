//! Aligned word vectors and the term neighbor function.
//!
//! Vectors come in the fastText text layout: a `count dim` header followed by
//! one `word v1 ... vp` row per word. Every language shares one dimension.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_term, Lexicon};
use crate::error::{Error, Result};

/// Word vectors for a single language.
#[derive(Debug, Clone, Default)]
pub struct VectorTable {
    dim: usize,
    words: Vec<String>,
    positions: HashMap<String, usize>,
    data: Vec<f32>,
}

impl VectorTable {
    pub fn from_rows<I>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut table = Self {
            dim,
            ..Self::default()
        };
        for (i, (word, vector)) in rows.into_iter().enumerate() {
            if vector.len() != dim {
                return Err(Error::EmbeddingParse {
                    line: i + 1,
                    message: format!("expected {dim} values, found {}", vector.len()),
                });
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::EmbeddingParse {
                    line: i + 1,
                    message: "non-finite component".into(),
                });
            }
            table.push(word, &vector);
        }
        Ok(table)
    }

    fn push(&mut self, word: String, vector: &[f32]) {
        if self.positions.contains_key(&word) {
            return;
        }
        self.positions.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.positions.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        let i = *self.positions.get(word)?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Parse a `.vec` text stream.
///
/// Words are lowercased and the first occurrence wins, matching the lowercased
/// tokens produced by the tokenizer. When `restrict_to` is given only those
/// (lowercase) words are kept.
pub fn load_embeddings<R: BufRead>(source: R, restrict_to: Option<&HashSet<String>>) -> Result<VectorTable> {
    let mut lines = source.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(Error::EmbeddingParse {
                line: 1,
                message: "missing \"count dim\" header".into(),
            })
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dim = match fields.as_slice() {
        [count, dim] if count.parse::<usize>().is_ok() => dim.parse::<usize>().ok(),
        _ => None,
    }
    .filter(|&d| d > 0)
    .ok_or_else(|| Error::EmbeddingParse {
        line: 1,
        message: format!("expected \"count dim\" header, found {header:?}"),
    })?;

    let mut table = VectorTable {
        dim,
        ..VectorTable::default()
    };
    let mut vector = Vec::with_capacity(dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let (word, rest) = line.split_once(' ').unwrap_or((line, ""));
        let word = word.to_lowercase();
        if restrict_to.is_some_and(|keep| !keep.contains(&word)) || table.contains(&word) {
            continue;
        }
        vector.clear();
        for value in rest.split_ascii_whitespace() {
            let v: f32 = value.parse().map_err(|_| Error::EmbeddingParse {
                line: line_no,
                message: format!("invalid number {value:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::EmbeddingParse {
                    line: line_no,
                    message: format!("non-finite component {value:?}"),
                });
            }
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(Error::EmbeddingParse {
                line: line_no,
                message: format!("expected {dim} values, found {}", vector.len()),
            });
        }
        table.push(word, &vector);
    }
    Ok(table)
}

/// Vector tables for every language, all of dimension `p`.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingRegistry {
    dim: Option<usize>,
    tables: BTreeMap<String, VectorTable>,
}

impl EmbeddingRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lang: impl Into<String>, table: VectorTable) -> Result<()> {
        let lang = lang.into();
        match self.dim {
            Some(expected) if expected != table.dim() => {
                return Err(Error::DimensionMismatch {
                    lang,
                    expected,
                    found: table.dim(),
                })
            }
            _ => self.dim = Some(table.dim()),
        }
        self.tables.insert(lang, table);
        Ok(())
    }

    /// Parse a vector stream for `lang` and add it to the registry.
    pub fn load<R: BufRead>(&mut self, lang: &str, source: R, restrict_to: Option<&HashSet<String>>) -> Result<()> {
        let table = load_embeddings(source, restrict_to)?;
        self.insert(lang, table)
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn has_language(&self, lang: &str) -> bool {
        self.tables.contains_key(lang)
    }

    /// Vector for a tagged term such as `"fr:école"`.
    pub fn vector(&self, term: &str) -> Option<&[f32]> {
        let (lang, word) = split_term(term)?;
        self.tables.get(lang)?.get(word)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.vector(term).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Terms are replaced by their neighbors.
    #[default]
    Replacement,
    /// Terms are kept alongside their neighbors.
    Expansion,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Replacement => "replacement",
            Mode::Expansion => "expansion",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Mode::Replacement => Mode::Expansion,
            Mode::Expansion => Mode::Replacement,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replacement" => Ok(Mode::Replacement),
            "expansion" => Ok(Mode::Expansion),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?} (expected replacement or expansion)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

/// Dense vectors for the lexicon terms, row `j` holding term `j`.
#[derive(Debug, Clone)]
pub struct LexiconVectors {
    dim: usize,
    data: Vec<f32>,
    metric: Metric,
    norms: Vec<f64>,
}

#[derive(PartialEq)]
struct Candidate {
    distance: f64,
    term: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.term.cmp(&other.term))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl LexiconVectors {
    pub fn new(lexicon: &Lexicon, registry: &EmbeddingRegistry, metric: Metric) -> Result<Self> {
        let dim = registry.dim().unwrap_or(0);
        let mut data = Vec::with_capacity(lexicon.len() * dim);
        for term in lexicon.terms() {
            let v = registry
                .vector(term)
                .ok_or_else(|| Error::MissingVector(term.clone()))?;
            data.extend_from_slice(v);
        }
        Ok(Self::from_raw(dim, data, metric))
    }

    /// Build from a row-major `len × dim` buffer.
    pub fn from_raw(dim: usize, data: Vec<f32>, metric: Metric) -> Self {
        let norms = if dim == 0 {
            Vec::new()
        } else {
            data.chunks_exact(dim)
                .map(|row| row.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt())
                .collect()
        };
        Self {
            dim,
            data,
            metric,
            norms,
        }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    fn row(&self, j: usize) -> &[f32] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    /// Squared Euclidean distance (accumulated in `f64` over ascending
    /// components) or cosine distance `1 - cos`.
    pub fn distance(&self, a: u32, b: u32) -> f64 {
        let (x, y) = (self.row(a as usize), self.row(b as usize));
        match self.metric {
            Metric::Euclidean => x
                .iter()
                .zip(y)
                .map(|(&u, &v)| {
                    let d = u as f64 - v as f64;
                    d * d
                })
                .sum(),
            Metric::Cosine => {
                let dot: f64 = x.iter().zip(y).map(|(&u, &v)| u as f64 * v as f64).sum();
                let denom = self.norms[a as usize] * self.norms[b as usize];
                if denom == 0.0 {
                    1.0
                } else {
                    1.0 - dot / denom
                }
            }
        }
    }

    /// The `m` closest other terms, ordered by `(distance, term id)`; in
    /// expansion mode the query term itself is prepended.
    pub fn nearest_terms(&self, term: u32, m: usize, mode: Mode) -> Result<Vec<u32>> {
        if term as usize >= self.len() {
            return Err(Error::MissingVector(format!("#{term}")));
        }
        if m == 0 {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(m + 1);
        for other in 0..self.len() as u32 {
            if other == term {
                continue;
            }
            let candidate = Candidate {
                distance: self.distance(term, other),
                term: other,
            };
            if heap.len() < m {
                heap.push(candidate);
            } else if heap.peek().is_some_and(|worst| candidate < *worst) {
                heap.pop();
                heap.push(candidate);
            }
        }
        let mut out = Vec::with_capacity(m + 1);
        if mode == Mode::Expansion {
            out.push(term);
        }
        out.extend(heap.into_sorted_vec().into_iter().map(|c| c.term));
        Ok(out)
    }
}

/// Cached map from each lexicon term to its closest lexicon terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborFunction {
    m: usize,
    mode: Mode,
    metric: Metric,
    table: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborFunctionHeader {
    #[serde(rename = "M")]
    pub m: usize,
    pub mode: Mode,
    pub metric: Metric,
    pub lexicon_hash: String,
}

#[derive(Serialize, Deserialize)]
struct NeighborFunctionRow {
    term: u32,
    neighbors: Vec<u32>,
}

impl NeighborFunction {
    pub fn from_table(m: usize, mode: Mode, metric: Metric, table: Vec<Vec<u32>>) -> Self {
        Self {
            m,
            mode,
            metric,
            table,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, term: u32) -> &[u32] {
        self.table.get(term as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The same neighborhoods under the other mode (self added or removed).
    pub fn with_mode(&self, mode: Mode) -> Self {
        if mode == self.mode {
            return self.clone();
        }
        let table = self
            .table
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let j = j as u32;
                match mode {
                    Mode::Expansion => std::iter::once(j).chain(row.iter().copied()).collect(),
                    Mode::Replacement => row.iter().copied().filter(|&t| t != j).collect(),
                }
            })
            .collect();
        Self {
            m: self.m,
            mode,
            metric: self.metric,
            table,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W, lexicon_hash: &str) -> Result<()> {
        let header = NeighborFunctionHeader {
            m: self.m,
            mode: self.mode,
            metric: self.metric,
            lexicon_hash: lexicon_hash.to_string(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for (term, neighbors) in self.table.iter().enumerate() {
            serde_json::to_writer(
                &mut out,
                &NeighborFunctionRow {
                    term: term as u32,
                    neighbors: neighbors.clone(),
                },
            )?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Read a cache written by [`NeighborFunction::write_jsonl`].
    pub fn read_jsonl<R: BufRead>(source: R) -> Result<(NeighborFunctionHeader, Self)> {
        let mut lines = source.lines();
        let header_line = lines.next().transpose()?.ok_or_else(|| Error::MalformedRow {
            row: 1,
            message: "missing neighbor function header".into(),
        })?;
        let header: NeighborFunctionHeader = serde_json::from_str(&header_line)?;
        let mut table = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: NeighborFunctionRow = serde_json::from_str(&line)?;
            if row.term as usize != table.len() {
                return Err(Error::MalformedRow {
                    row: i + 2,
                    message: format!("expected term {}, found {}", table.len(), row.term),
                });
            }
            table.push(row.neighbors);
        }
        let f = Self::from_table(header.m, header.mode, header.metric, table);
        Ok((header, f))
    }
}

/// Materialize `f` for every lexicon term.
pub fn build_neighbor_function(vectors: &LexiconVectors, m: usize, mode: Mode) -> Result<NeighborFunction> {
    let table = (0..vectors.len() as u32)
        .into_par_iter()
        .map(|j| vectors.nearest_terms(j, m, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(NeighborFunction::from_table(m, mode, vectors.metric, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_space() -> LexiconVectors {
        LexiconVectors::from_raw(2, vec![0.0, 0.0, 1.0, 0.0, 3.0, 0.0], Metric::Euclidean)
    }

    #[test]
    fn parses_vec_stream() {
        let t = load_embeddings("2 3\na 1 0 0\nb 0 1 0".as_bytes(), None).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("b"), Some(&[0.0, 1.0, 0.0][..]));
    }

    #[test]
    fn short_row_reports_line() {
        let err = load_embeddings("2 3\na 1 0\nb 0 1 0".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::EmbeddingParse { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_header_and_nan() {
        assert!(load_embeddings("a 1 0\n".as_bytes(), None).is_err());
        let err = load_embeddings("1 2\na NaN 0\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::EmbeddingParse { line: 2, .. }));
    }

    #[test]
    fn restrict_and_lowercase() {
        let keep: HashSet<String> = ["school".to_string()].into();
        let t = load_embeddings("3 1 \nSchool 1 \nschool 2\nother 3\n".as_bytes(), Some(&keep)).unwrap();
        assert_eq!(t.words(), ["school"]);
        assert_eq!(t.get("school"), Some(&[1.0][..]));
    }

    #[test]
    fn registry_dimension_must_agree() {
        let mut reg = EmbeddingRegistry::new();
        reg.load("en", "1 2\na 1 2\n".as_bytes(), None).unwrap();
        let err = reg.load("fr", "1 3\na 1 2 3\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3, .. }));
        assert_eq!(reg.vector("en:a"), Some(&[1.0, 2.0][..]));
        assert!(reg.vector("fr:a").is_none());
    }

    #[test]
    fn nearest_terms_examples() {
        let v = line_space();
        assert_eq!(v.nearest_terms(0, 1, Mode::Replacement).unwrap(), [1]);
        assert_eq!(v.nearest_terms(0, 2, Mode::Expansion).unwrap(), [0, 1, 2]);
        // clamped to the other terms
        assert_eq!(v.nearest_terms(1, 10, Mode::Replacement).unwrap(), [0, 2]);
    }

    #[test]
    fn ties_break_by_term_id() {
        let v = LexiconVectors::from_raw(1, vec![0.0, 1.0, -1.0, 1.0], Metric::Euclidean);
        assert_eq!(v.nearest_terms(0, 3, Mode::Replacement).unwrap(), [1, 2, 3]);
        assert_eq!(v.nearest_terms(0, 1, Mode::Replacement).unwrap(), [1]);
    }

    #[test]
    fn single_term_lexicon_has_no_neighbors() {
        let v = LexiconVectors::from_raw(2, vec![1.0, 1.0], Metric::Euclidean);
        let f = build_neighbor_function(&v, 3, Mode::Replacement).unwrap();
        assert!(f.get(0).is_empty());
    }

    #[test]
    fn mode_switch_adds_or_removes_self() {
        let f = build_neighbor_function(&line_space(), 1, Mode::Replacement).unwrap();
        let g = f.with_mode(Mode::Expansion);
        assert_eq!(g.get(2), [2, 1]);
        assert_eq!(g.with_mode(Mode::Replacement), f);
        assert_eq!(g, build_neighbor_function(&line_space(), 1, Mode::Expansion).unwrap());
    }

    #[test]
    fn cache_roundtrip() {
        let f = build_neighbor_function(&line_space(), 2, Mode::Expansion).unwrap();
        let mut buf = Vec::new();
        f.write_jsonl(&mut buf, "abc").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"M\":2,\"mode\":\"expansion\",\"metric\":\"euclidean\",\"lexicon_hash\":\"abc\"}\n"));
        assert!(text.contains("{\"term\":0,\"neighbors\":[0,1,2]}"));
        let (header, g) = NeighborFunction::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(header.lexicon_hash, "abc");
        assert_eq!(f, g);
    }

    #[test]
    fn cosine_metric_orders_by_angle() {
        let v = LexiconVectors::from_raw(2, vec![1.0, 0.0, 10.0, 1.0, 0.0, 1.0], Metric::Cosine);
        assert_eq!(v.nearest_terms(0, 2, Mode::Replacement).unwrap(), [1, 2]);
    }
}
