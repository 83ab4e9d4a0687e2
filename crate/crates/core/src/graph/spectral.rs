//! Algebraic connectivity of an undirected simple graph.
//!
//! Small graphs use a dense symmetric eigendecomposition; larger ones run
//! Lanczos with full reorthogonalization on the Laplacian restricted to the
//! complement of the constant vector, restarting from the current Ritz vector.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Graphs with fewer nodes use the dense solver.
    pub dense_threshold: usize,
    /// Residual tolerance for the iterative solver.
    pub tolerance: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 2000,
            tolerance: 1e-9,
            krylov_dim: 120,
            max_restarts: 500,
            seed: 0x5eed,
        }
    }
}

/// Undirected simple graph as sorted, duplicate-free adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adjacency: Vec<Vec<u32>>,
}

impl UndirectedGraph {
    /// Symmetrize directed edges, dropping self-loops and duplicates.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            if a != b {
                adjacency[a as usize].push(b);
                adjacency[b as usize].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self { adjacency }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    /// Component label of every node, labels numbered from zero.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.n()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.adjacency[v] {
                    if label[w as usize] == usize::MAX {
                        label[w as usize] = count;
                        stack.push(w as usize);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    /// Induced subgraph on the largest connected component.
    pub fn largest_component(&self) -> Self {
        let (count, label) = self.components();
        if count <= 1 {
            return self.clone();
        }
        let mut sizes = vec![0usize; count];
        for &l in &label {
            sizes[l] += 1;
        }
        // first label among the largest
        let best = (0..count).max_by_key(|&l| (sizes[l], std::cmp::Reverse(l))).unwrap_or(0);
        let mut remap = vec![u32::MAX; self.n()];
        let mut next = 0u32;
        for v in 0..self.n() {
            if label[v] == best {
                remap[v] = next;
                next += 1;
            }
        }
        let adjacency = (0..self.n())
            .filter(|&v| label[v] == best)
            .map(|v| self.adjacency[v].iter().map(|&w| remap[w as usize]).collect())
            .collect();
        Self { adjacency }
    }

    fn laplacian_apply(&self, x: &[f64], out: &mut [f64]) {
        for (v, list) in self.adjacency.iter().enumerate() {
            let mut acc = list.len() as f64 * x[v];
            for &w in list {
                acc -= x[w as usize];
            }
            out[v] = acc;
        }
    }

    pub fn dense_laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = DMatrix::zeros(n, n);
        for (v, list) in self.adjacency.iter().enumerate() {
            l[(v, v)] = list.len() as f64;
            for &w in list {
                l[(v, w as usize)] = -1.0;
            }
        }
        l
    }
}

/// Second-smallest eigenvalue of the unnormalized Laplacian; exactly zero when
/// the graph is disconnected or has fewer than two nodes.
pub fn algebraic_connectivity(graph: &UndirectedGraph, options: &SpectralOptions) -> f64 {
    if graph.n() < 2 || graph.components().0 > 1 {
        return 0.0;
    }
    let value = if graph.n() < options.dense_threshold {
        dense_lambda2(graph)
    } else {
        lanczos_lambda2(graph, options)
    };
    value.max(0.0)
}

fn dense_lambda2(graph: &UndirectedGraph) -> f64 {
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(graph.dense_laplacian()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    eigenvalues[1]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    norm
}

fn lanczos_lambda2(graph: &UndirectedGraph, options: &SpectralOptions) -> f64 {
    let n = graph.n();
    let dim = options.krylov_dim.clamp(2, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut best = f64::INFINITY;

    for _ in 0..=options.max_restarts {
        remove_mean(&mut start);
        normalize(&mut start);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas = Vec::with_capacity(dim);
        let mut betas: Vec<f64> = Vec::with_capacity(dim);
        let mut w = vec![0.0; n];
        let mut residual_beta = 0.0;
        for k in 0..dim {
            graph.laplacian_apply(&basis[k], &mut w);
            let alpha = dot(&w, &basis[k]);
            alphas.push(alpha);
            // full reorthogonalization, twice
            for _ in 0..2 {
                remove_mean(&mut w);
                for q in &basis {
                    let c = dot(&w, q);
                    axpy(-c, q, &mut w);
                }
            }
            let beta = dot(&w, &w).sqrt();
            residual_beta = beta;
            if k + 1 == dim || beta < 1e-12 {
                break;
            }
            betas.push(beta);
            let next: Vec<f64> = w.iter().map(|v| v / beta).collect();
            basis.push(next);
        }

        let m = alphas.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (idx, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty tridiagonal");
        let last = eig.eigenvectors[(m - 1, idx)];
        let residual = (residual_beta * last).abs();
        best = theta;
        if residual <= options.tolerance || residual_beta < 1e-12 {
            return theta;
        }
        let mut ritz = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            axpy(eig.eigenvectors[(j, idx)], q, &mut ritz);
        }
        start = ritz;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: u32) -> UndirectedGraph {
        UndirectedGraph::from_edges(n as usize, (0..n).map(|i| (i, (i + 1) % n)))
    }

    #[test]
    fn four_cycle_is_two() {
        let l2 = algebraic_connectivity(&cycle(4), &SpectralOptions::default());
        assert!((l2 - 2.0).abs() < 1e-12, "{l2}");
    }

    #[test]
    fn disjoint_edges_are_zero() {
        let g = UndirectedGraph::from_edges(4, [(0, 1), (2, 3)]);
        assert_eq!(algebraic_connectivity(&g, &SpectralOptions::default()), 0.0);
        assert_eq!(g.largest_component().n(), 2);
    }

    #[test]
    fn lanczos_agrees_with_closed_form_cycle() {
        // λ2 of C_n is 2 - 2 cos(2π/n)
        let n = 400;
        let opts = SpectralOptions {
            dense_threshold: 10,
            ..SpectralOptions::default()
        };
        let l2 = algebraic_connectivity(&cycle(n), &opts);
        let expected = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!((l2 - expected).abs() < 1e-8, "{l2} vs {expected}");
    }

    #[test]
    fn lanczos_agrees_with_dense_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..5 {
            let n = 300 + 50 * trial;
            let mut edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
            for _ in 0..n * 2 {
                edges.push((rng.gen_range(0..n as u32), rng.gen_range(0..n as u32)));
            }
            let g = UndirectedGraph::from_edges(n, edges);
            let dense = dense_lambda2(&g);
            let opts = SpectralOptions {
                dense_threshold: 10,
                ..SpectralOptions::default()
            };
            let sparse = algebraic_connectivity(&g, &opts);
            assert!((dense - sparse).abs() < 1e-8, "n={n}: {dense} vs {sparse}");
        }
    }
}
