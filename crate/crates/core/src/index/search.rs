//! Candidate scoring over the columns of `X`.
//!
//! A query row `q` scores candidate `i` as `q · X_i / ||X_i||`. The query norm
//! is left out; it is constant per query and does not change rankings.

use std::cmp::Ordering;

use super::matrix::TermDocMatrix;

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: Vec<Vec<(u32, f64)>>,
    norms: Vec<f64>,
}

/// Total order for ranked candidates: score descending, then document index ascending.
pub fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl InvertedIndex {
    pub fn new(x: &TermDocMatrix) -> Self {
        let mut postings = vec![Vec::new(); x.n_terms()];
        for (doc, row) in x.rows().iter().enumerate() {
            for &(t, w) in row {
                postings[t as usize].push((doc as u32, w));
            }
        }
        Self {
            postings,
            norms: x.row_norms(),
        }
    }

    pub fn n_docs(&self) -> usize {
        self.norms.len()
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Top `n` candidates for a query row, excluding `exclude` and zero-norm rows.
    ///
    /// When fewer than `n` candidates share a term with the query, the list is
    /// padded with zero-score candidates in index order unless `positive_only`.
    pub fn top_n(&self, query: &[(u32, f64)], exclude: Option<usize>, n: usize, positive_only: bool) -> Vec<(usize, f64)> {
        if n == 0 {
            return Vec::new();
        }
        let mut acc = vec![0.0f64; self.n_docs()];
        let mut touched = Vec::new();
        for &(t, qw) in query {
            for &(doc, xw) in &self.postings[t as usize] {
                let slot = &mut acc[doc as usize];
                if *slot == 0.0 {
                    touched.push(doc as usize);
                }
                *slot += qw * xw;
            }
        }
        let mut scored: Vec<(usize, f64)> = touched
            .iter()
            .filter(|&&doc| Some(doc) != exclude)
            .map(|&doc| (doc, acc[doc] / self.norms[doc]))
            .collect();
        if scored.len() > n {
            scored.select_nth_unstable_by(n - 1, rank_order);
            scored.truncate(n);
        }
        scored.sort_unstable_by(rank_order);
        if scored.len() < n && !positive_only {
            for (doc, (&a, &norm)) in acc.iter().zip(&self.norms).enumerate() {
                if scored.len() == n {
                    break;
                }
                if a == 0.0 && Some(doc) != exclude && norm > 0.0 {
                    scored.push((doc, 0.0));
                }
            }
        }
        scored
    }
}
