//! Dense, loop-based reference implementation of lexicon construction, the
//! term neighbor function, the weighted matrices and top-N retrieval.
//!
//! Deliberately written without the library's sparse structures. Sums run
//! over ascending term ids starting from 0.0 so scores agree bit for bit with
//! any implementation that accumulates in the same order.

use std::collections::{BTreeMap, BTreeSet};

use super::synth::SynthCorpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Replacement,
    Expansion,
}

pub struct DenseModel {
    pub terms: Vec<String>,
    pub df: Vec<u32>,
    /// Binary document-term matrix.
    pub y: Vec<Vec<u8>>,
    /// Binary embedded document-term matrix.
    pub y_emb: Vec<Vec<u8>>,
    pub x: Vec<Vec<f64>>,
    pub x_emb: Vec<Vec<f64>>,
    pub f: Vec<Vec<usize>>,
    pub norms: Vec<f64>,
}

fn tokens(text: &str, lang: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| format!("{lang}:{}", w.to_lowercase()))
        .collect()
}

pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for k in 0..a.len() {
        let d = a[k] as f64 - b[k] as f64;
        s += d * d;
    }
    s
}

/// Exhaustive nearest neighbors of `query` among `pool`, excluding `skip`.
pub fn brute_force_knn(pool: &[Vec<f32>], query: &[f32], skip: Option<usize>, m: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != skip)
        .map(|(k, v)| (squared_distance(query, v), k))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.into_iter().take(m).map(|(_, k)| k).collect()
}

impl DenseModel {
    pub fn build(corpus: &SynthCorpus, min_df: usize, max_df_ratio: f64, m: usize, mode: OracleMode) -> Self {
        let n = corpus.docs.len();
        let doc_terms: Vec<BTreeSet<String>> = corpus
            .docs
            .iter()
            .map(|d| tokens(&d.text, &d.lang).into_iter().collect())
            .collect();
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for set in &doc_terms {
            for t in set {
                *counts.entry(t.clone()).or_default() += 1;
            }
        }
        let mut terms = Vec::new();
        let mut df = Vec::new();
        let mut vecs: Vec<Vec<f32>> = Vec::new();
        for (t, c) in counts {
            let (lang, word) = t.split_once(':').unwrap();
            let Some(v) = corpus.vector(lang, word) else { continue };
            if (c as usize) < min_df || c as f64 / n as f64 > max_df_ratio {
                continue;
            }
            vecs.push(v.to_vec());
            terms.push(t);
            df.push(c);
        }
        let l = terms.len();
        let id: BTreeMap<&str, usize> = terms.iter().enumerate().map(|(j, t)| (t.as_str(), j)).collect();

        let mut y = vec![vec![0u8; l]; n];
        for (i, set) in doc_terms.iter().enumerate() {
            for t in set {
                if let Some(&j) = id.get(t.as_str()) {
                    y[i][j] = 1;
                }
            }
        }

        let mut f = Vec::with_capacity(l);
        for j in 0..l {
            let mut near = brute_force_knn(&vecs, &vecs[j], Some(j), m);
            if mode == OracleMode::Expansion {
                near.insert(0, j);
            }
            f.push(near);
        }

        let mut y_emb = vec![vec![0u8; l]; n];
        for i in 0..n {
            for j in 0..l {
                if y[i][j] == 1 {
                    for &k in &f[j] {
                        y_emb[i][k] = 1;
                    }
                }
            }
        }

        let idf: Vec<f64> = df.iter().map(|&d| (n as f64 / d as f64).ln()).collect();
        let weigh = |rows: &Vec<Vec<u8>>| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| (0..l).map(|j| if r[j] == 1 { idf[j] } else { 0.0 }).collect())
                .collect()
        };
        let x = weigh(&y);
        let x_emb = weigh(&y_emb);
        let norms = x
            .iter()
            .map(|r| {
                let mut s = 0.0;
                for v in r {
                    s += v * v;
                }
                s.sqrt()
            })
            .collect();
        Self {
            terms,
            df,
            y,
            y_emb,
            x,
            x_emb,
            f,
            norms,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    fn query_row(&self, q: usize, embedded: bool) -> &[f64] {
        if embedded {
            &self.x_emb[q]
        } else {
            &self.x[q]
        }
    }

    pub fn dot(&self, q: usize, i: usize, embedded: bool) -> f64 {
        let a = self.query_row(q, embedded);
        let mut s = 0.0;
        for j in 0..a.len() {
            if a[j] != 0.0 && self.x[i][j] != 0.0 {
                s += a[j] * self.x[i][j];
            }
        }
        s
    }

    /// Candidate-normalized scores for every eligible candidate, or `None`
    /// when the query row has no nonzero weight.
    pub fn scores(&self, q: usize, embedded: bool) -> Option<Vec<(usize, f64)>> {
        if self.query_row(q, embedded).iter().all(|&v| v == 0.0) {
            return None;
        }
        Some(
            (0..self.n())
                .filter(|&i| i != q && self.norms[i] > 0.0)
                .map(|i| (i, self.dot(q, i, embedded) / self.norms[i]))
                .collect(),
        )
    }

    pub fn top_n(&self, q: usize, embedded: bool, n: usize, positive_only: bool) -> Option<Vec<(usize, f64)>> {
        let mut all = self.scores(q, embedded)?;
        if positive_only {
            all.retain(|&(_, s)| s > 0.0);
        }
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(n);
        Some(all)
    }

    /// Full cosine similarity ranking, normalizing by both vectors.
    pub fn cosine_ranking(&self, q: usize, embedded: bool) -> Option<Vec<usize>> {
        let a = self.query_row(q, embedded);
        let mut qn = 0.0;
        for v in a {
            qn += v * v;
        }
        let qn = qn.sqrt();
        if qn == 0.0 {
            return None;
        }
        let mut all: Vec<(usize, f64)> = (0..self.n())
            .filter(|&i| i != q && self.norms[i] > 0.0)
            .map(|i| (i, self.dot(q, i, embedded) / (qn * self.norms[i])))
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        Some(all.into_iter().map(|(i, _)| i).collect())
    }
}
