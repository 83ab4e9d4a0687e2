//! Sparse document-term matrices: binary occurrence `Y`, TF-IDF `X` and the
//! embedded TF-IDF matrix built from neighbor-expanded documents.

use rayon::prelude::*;

use crate::corpus::EncodedDocument;
use crate::embedding::NeighborFunction;
use crate::error::{Error, Result};

/// One sparse row: `(term id, weight)` pairs sorted by term id.
pub type SparseRow = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    n_terms: usize,
    rows: Vec<SparseRow>,
    df: Vec<u32>,
    idf: Vec<f64>,
}

/// `ln(n / df)`, defined as zero when `df == 0`.
pub fn idf_weight(n: usize, df: u32) -> f64 {
    if df == 0 {
        0.0
    } else {
        (n as f64 / df as f64).ln()
    }
}

impl TermDocMatrix {
    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, doc: usize) -> &[(u32, f64)] {
        &self.rows[doc]
    }

    /// Document frequencies of the original binary matrix.
    pub fn df(&self) -> &[u32] {
        &self.df
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Stored weight at `(doc, term)`, zero when absent.
    pub fn weight(&self, doc: usize, term: u32) -> f64 {
        let row = &self.rows[doc];
        row.binary_search_by_key(&term, |&(t, _)| t)
            .map(|k| row[k].1)
            .unwrap_or(0.0)
    }

    /// Euclidean norm of every row, summed over ascending term ids.
    pub fn row_norms(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt())
            .collect()
    }

    /// Weight a set-valued representation by this matrix's IDF, dropping zero weights.
    pub fn weigh_terms(&self, terms: &[u32]) -> SparseRow {
        terms
            .iter()
            .filter_map(|&t| {
                let w = self.idf.get(t as usize).copied().unwrap_or(0.0);
                (w != 0.0).then_some((t, w))
            })
            .collect()
    }
}

/// Binary term frequency matrix with its column sums.
pub fn build_binary_tf(encoded: &[EncodedDocument], n_terms: usize) -> Result<TermDocMatrix> {
    let mut df = vec![0u32; n_terms];
    let mut rows = Vec::with_capacity(encoded.len());
    for doc in encoded {
        let mut row = Vec::with_capacity(doc.term_ids.len());
        let mut previous = None;
        for &t in &doc.term_ids {
            if t as usize >= n_terms {
                return Err(Error::InvalidConfig(format!(
                    "document {:?} references term {t} outside a lexicon of {n_terms}",
                    doc.doc_id
                )));
            }
            if previous.is_some_and(|p| p >= t) {
                return Err(Error::InvalidConfig(format!(
                    "document {:?} term ids are not strictly ascending",
                    doc.doc_id
                )));
            }
            previous = Some(t);
            df[t as usize] += 1;
            row.push((t, 1.0));
        }
        rows.push(row);
    }
    let n = rows.len();
    let idf = df.iter().map(|&d| idf_weight(n, d)).collect();
    Ok(TermDocMatrix {
        n_terms,
        rows,
        df,
        idf,
    })
}

/// TF-IDF matrix: each present term weighs `ln(n / df)`; zero weights are not stored.
pub fn build_tfidf(y: &TermDocMatrix) -> TermDocMatrix {
    let rows = y
        .rows
        .iter()
        .map(|row| {
            let terms: Vec<u32> = row.iter().map(|&(t, _)| t).collect();
            y.weigh_terms(&terms)
        })
        .collect();
    TermDocMatrix {
        n_terms: y.n_terms,
        rows,
        df: y.df.clone(),
        idf: y.idf.clone(),
    }
}

/// Per-document union of the neighbor sets of its terms.
pub fn build_embedded_corpus(encoded: &[EncodedDocument], f: &NeighborFunction) -> Vec<Vec<u32>> {
    encoded
        .par_iter()
        .map(|doc| {
            let mut terms: Vec<u32> = doc.term_ids.iter().flat_map(|&t| f.get(t).iter().copied()).collect();
            terms.sort_unstable();
            terms.dedup();
            terms
        })
        .collect()
}

/// Weight the embedded corpus with IDF taken from the original binary matrix.
///
/// Terms that never occur in the original documents (`df == 0`) get weight
/// zero and are dropped together with all-document terms.
pub fn build_embedded_tfidf(embedded: &[Vec<u32>], y: &TermDocMatrix) -> TermDocMatrix {
    let rows = embedded.par_iter().map(|terms| y.weigh_terms(terms)).collect();
    TermDocMatrix {
        n_terms: y.n_terms,
        rows,
        df: y.df.clone(),
        idf: y.idf.clone(),
    }
}
