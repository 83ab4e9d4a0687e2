//! The recommendation network and its connectivity metrics.
//!
//! Every document points to its word and embedding neighbors. λ2 is measured
//! on the symmetrized simple graph; reachability, distances, in-degrees and
//! ego counts follow edge direction.

mod spectral;

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use spectral::{algebraic_connectivity as undirected_algebraic_connectivity, SpectralOptions, UndirectedGraph};

use crate::embedding::Mode;
use crate::error::{Error, Result};
use crate::index::DualIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Word,
    Embedding,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Word => "word",
            EdgeKind::Embedding => "embedding",
        }
    }
}

/// Directed, typed recommendation edges over `n` documents.
#[derive(Debug, Clone, PartialEq)]
pub struct RecGraph {
    n: usize,
    edges: Vec<(u32, u32, EdgeKind)>,
    /// Simple out-adjacency: types and duplicates collapsed, sorted.
    out: Vec<Vec<u32>>,
}

impl RecGraph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32, EdgeKind)>) -> Result<Self> {
        let edges: Vec<_> = edges.into_iter().collect();
        let mut out = vec![Vec::new(); n];
        for &(src, dst, _) in &edges {
            if src as usize >= n || dst as usize >= n {
                return Err(Error::InvalidConfig(format!("edge {src}->{dst} outside {n} nodes")));
            }
            if src == dst {
                return Err(Error::InvalidConfig(format!("self-loop at node {src}")));
            }
            out[src as usize].push(dst);
        }
        for list in &mut out {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { n, edges, out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32, EdgeKind)] {
        &self.edges
    }

    pub fn out_neighbors(&self, v: usize) -> &[u32] {
        &self.out[v]
    }

    pub fn simple_edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for list in &self.out {
            for &w in list {
                deg[w as usize] += 1;
            }
        }
        deg
    }

    pub fn undirected(&self) -> UndirectedGraph {
        UndirectedGraph::from_edges(
            self.n,
            self.out
                .iter()
                .enumerate()
                .flat_map(|(v, list)| list.iter().map(move |&w| (v as u32, w))),
        )
    }

    /// Edge list as `src<TAB>dst<TAB>type`, using `ids` for node names.
    pub fn write_tsv<W: Write>(&self, mut out: W, ids: &[String]) -> Result<()> {
        for &(src, dst, kind) in &self.edges {
            writeln!(out, "{}\t{}\t{}", ids[src as usize], ids[dst as usize], kind.as_str())?;
        }
        Ok(())
    }
}

/// Edges from every document to its first `nw` word and `ne` embedding neighbors.
pub fn build_graph(index: &DualIndex, nw: usize, ne: usize) -> Result<RecGraph> {
    let k = index.config().cache_k;
    if nw.max(ne) > k {
        return Err(Error::ExceedsCache {
            requested: nw.max(ne),
            cached: k,
        });
    }
    let mut edges = Vec::new();
    for (src, cached) in index.cache().iter().enumerate() {
        let word = cached.word.as_deref().unwrap_or(&[]);
        let embedding = cached.embedding.as_deref().unwrap_or(&[]);
        for &(dst, _) in word.iter().take(nw) {
            edges.push((src as u32, dst as u32, EdgeKind::Word));
        }
        for &(dst, _) in embedding.iter().take(ne) {
            edges.push((src as u32, dst as u32, EdgeKind::Embedding));
        }
    }
    RecGraph::from_edges(index.n(), edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Exact all-source BFS below this many nodes; sampled sources above.
    pub exact_threshold: usize,
    pub sample_sources: usize,
    pub seed: u64,
    pub ego_radius: usize,
    pub in_degree_quantile: f64,
    pub ego_quantile: f64,
    #[serde(skip)]
    pub spectral: SpectralOptions,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            exact_threshold: 50_000,
            sample_sources: 2_000,
            seed: 0x5eed,
            ego_radius: 3,
            in_degree_quantile: 0.9,
            ego_quantile: 0.1,
            spectral: SpectralOptions::default(),
        }
    }
}

/// Second-smallest Laplacian eigenvalue of the symmetrized simple graph.
pub fn algebraic_connectivity(g: &RecGraph, options: &SpectralOptions) -> f64 {
    undirected_algebraic_connectivity(&g.undirected(), options)
}

/// λ2 of the largest connected component of the symmetrized graph.
pub fn largest_component_connectivity(g: &RecGraph, options: &SpectralOptions) -> f64 {
    undirected_algebraic_connectivity(&g.undirected().largest_component(), options)
}

/// BFS distances from `source`; `usize::MAX` marks unreachable nodes.
fn bfs(g: &RecGraph, source: usize, dist: &mut [usize], queue: &mut VecDeque<usize>, limit: usize) {
    dist.fill(usize::MAX);
    queue.clear();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d == limit {
            continue;
        }
        for &w in g.out_neighbors(v) {
            let w = w as usize;
            if dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
}

/// Aggregated reachability over a set of BFS sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reachability {
    /// Fraction of ordered pairs `(i, j)`, `i ≠ j`, with no directed path.
    pub unconnected: f64,
    /// Mean shortest-path length over connected ordered pairs.
    pub average_distance: Option<f64>,
    pub sources: usize,
    pub sampled: bool,
}

pub fn reachability(g: &RecGraph, options: &MetricsOptions) -> Reachability {
    let n = g.n();
    if n < 2 {
        return Reachability {
            unconnected: 0.0,
            average_distance: None,
            sources: n,
            sampled: false,
        };
    }
    let sampled = n >= options.exact_threshold && options.sample_sources < n;
    let sources: Vec<usize> = if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut s = sample(&mut rng, n, options.sample_sources.max(1)).into_vec();
        s.sort_unstable();
        s
    } else {
        (0..n).collect()
    };
    let (unreached, connected, total_distance) = sources
        .par_iter()
        .map_init(
            || (vec![usize::MAX; n], VecDeque::new()),
            |(dist, queue), &s| {
                bfs(g, s, dist, queue, usize::MAX);
                let mut reached = 0u64;
                let mut total = 0u64;
                for (v, &d) in dist.iter().enumerate() {
                    if v != s && d != usize::MAX {
                        reached += 1;
                        total += d as u64;
                    }
                }
                ((n as u64 - 1) - reached, reached, total)
            },
        )
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let pairs = sources.len() as f64 * (n - 1) as f64;
    Reachability {
        unconnected: unreached as f64 / pairs,
        average_distance: (connected > 0).then(|| total_distance as f64 / connected as f64),
        sources: sources.len(),
        sampled,
    }
}

pub fn unconnected_proportion(g: &RecGraph, options: &MetricsOptions) -> f64 {
    reachability(g, options).unconnected
}

pub fn average_distance(g: &RecGraph, options: &MetricsOptions) -> Option<f64> {
    reachability(g, options).average_distance
}

/// Nearest-rank percentile: the `⌈q·n⌉`-th smallest value (one-based, clamped to `[1, n]`).
pub fn nearest_rank(values: &mut [usize], q: f64) -> usize {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    let n = values.len();
    // guard against q·n landing a hair above an integer
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    values[rank - 1]
}

pub fn in_degree_percentile(g: &RecGraph, q: f64) -> usize {
    nearest_rank(&mut g.in_degrees(), q)
}

/// Number of other nodes reachable from each node along at most `radius` edges.
pub fn ego_counts(g: &RecGraph, radius: usize) -> Vec<usize> {
    let n = g.n();
    (0..n)
        .into_par_iter()
        .map_init(
            || (vec![usize::MAX; n], VecDeque::new()),
            |(dist, queue), s| {
                bfs(g, s, dist, queue, radius);
                // the source itself is excluded
                dist.iter().filter(|&&d| d != usize::MAX).count() - 1
            },
        )
        .collect()
}

pub fn ego_percentile(g: &RecGraph, radius: usize, q: f64) -> usize {
    nearest_rank(&mut ego_counts(g, radius), q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub nw: usize,
    pub ne: usize,
    pub mode: Mode,
    pub lambda2: f64,
    /// λ2 of the largest component, equal to `lambda2` for connected graphs.
    pub lambda2_lcc: f64,
    pub unconnected: f64,
    pub dist: Option<f64>,
    pub d90_in: usize,
    pub ego3_10: usize,
    pub sampled: bool,
    pub bfs_sources: usize,
}

impl ConnectivityReport {
    pub fn disconnected(&self) -> bool {
        self.lambda2 == 0.0
    }
}

/// All five metrics for an already built graph.
pub fn graph_report(g: &RecGraph, nw: usize, ne: usize, mode: Mode, options: &MetricsOptions) -> ConnectivityReport {
    let reach = reachability(g, options);
    let undirected = g.undirected();
    let lambda2 = undirected_algebraic_connectivity(&undirected, &options.spectral);
    let lambda2_lcc = if lambda2 > 0.0 {
        lambda2
    } else {
        undirected_algebraic_connectivity(&undirected.largest_component(), &options.spectral)
    };
    ConnectivityReport {
        nw,
        ne,
        mode,
        lambda2,
        lambda2_lcc,
        unconnected: reach.unconnected,
        dist: reach.average_distance,
        d90_in: in_degree_percentile(g, options.in_degree_quantile),
        ego3_10: ego_percentile(g, options.ego_radius, options.ego_quantile),
        sampled: reach.sampled,
        bfs_sources: reach.sources,
    }
}

pub fn connectivity_report(index: &DualIndex, nw: usize, ne: usize, options: &MetricsOptions) -> Result<ConnectivityReport> {
    let g = build_graph(index, nw, ne)?;
    Ok(graph_report(&g, nw, ne, index.config().mode, options))
}

/// Parse a sweep such as `"12,0;11,1;10,2"`.
pub fn parse_sweep(spec: &str) -> Result<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = spec
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| Error::InvalidConfig(format!("sweep entry {pair:?} is not \"nw,ne\"")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("sweep entry {pair:?} is not \"nw,ne\"")))
            };
            let (nw, ne) = (parse(a)?, parse(b)?);
            if nw + ne == 0 {
                return Err(Error::InvalidConfig("sweep entry 0,0 has no neighbors".into()));
            }
            Ok((nw, ne))
        })
        .collect::<Result<_>>()?;
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("empty sweep".into()));
    }
    Ok(pairs)
}

/// Twelve neighbors split from (12, 0) to (6, 6).
pub fn default_sweep() -> Vec<(usize, usize)> {
    (0..=6).map(|ne| (12 - ne, ne)).collect()
}

pub const CSV_HEADER: &str = "nw,ne,mode,lambda2,unconnected,dist,d90_in,ego3_10,sampled";

/// Label used in the `mode` column; rows without embedding edges do not depend on the mode.
pub fn mode_label(report: &ConnectivityReport, collapsed: bool) -> &'static str {
    if collapsed && report.ne == 0 {
        "any"
    } else {
        report.mode.as_str()
    }
}

pub fn csv_row(report: &ConnectivityReport, mode_label: &str) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        report.nw,
        report.ne,
        mode_label,
        report.lambda2,
        report.unconnected,
        report.dist.map(|d| d.to_string()).unwrap_or_default(),
        report.d90_in,
        report.ego3_10,
        report.sampled
    )
}

/// Human-readable table; λ2 of a disconnected graph is shown as `·`.
pub fn pretty_table(rows: &[(String, ConnectivityReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4} {:>4}  {:<11} {:>8} {:>7} {:>6} {:>6} {:>7}  sampled",
        "nw", "ne", "mode", "lambda2", "u.c.", "dist", "d90_in", "ego3_10"
    );
    for (label, r) in rows {
        let lambda2 = if r.disconnected() {
            "·".to_string()
        } else {
            format!("{:.3}", r.lambda2)
        };
        let dist = r.dist.map(|d| format!("{d:.1}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>4} {:>4}  {:<11} {:>8} {:>6.1}% {:>6} {:>6} {:>7}  {}",
            r.nw,
            r.ne,
            label,
            lambda2,
            r.unconnected * 100.0,
            dist,
            r.d90_in,
            r.ego3_10,
            r.sampled
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn directed(n: usize, edges: &[(u32, u32)]) -> RecGraph {
        RecGraph::from_edges(n, edges.iter().map(|&(a, b)| (a, b, EdgeKind::Word))).unwrap()
    }

    fn four_cycle() -> RecGraph {
        directed(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])
    }

    fn out_star() -> RecGraph {
        directed(4, &[(0, 1), (0, 2), (0, 3)])
    }

    #[test]
    fn rejects_self_loops() {
        assert!(RecGraph::from_edges(2, [(1, 1, EdgeKind::Word)]).is_err());
    }

    #[test]
    fn duplicate_typed_edges_collapse() {
        let g = RecGraph::from_edges(2, [(0, 1, EdgeKind::Word), (0, 1, EdgeKind::Embedding)]).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.simple_edge_count(), 1);
        assert_eq!(g.in_degrees(), [0, 1]);
    }

    #[test]
    fn four_cycle_metrics() {
        let g = four_cycle();
        let opts = MetricsOptions::default();
        assert!((algebraic_connectivity(&g, &opts.spectral) - 2.0).abs() < 1e-12);
        assert_eq!(unconnected_proportion(&g, &opts), 0.0);
        assert_eq!(average_distance(&g, &opts), Some(2.0));
        assert_eq!(in_degree_percentile(&g, 0.9), 1);
        assert_eq!(ego_percentile(&g, 3, 0.1), 3);
    }

    #[test]
    fn out_star_metrics() {
        let g = out_star();
        let opts = MetricsOptions::default();
        assert_eq!(unconnected_proportion(&g, &opts), 0.75);
        assert_eq!(average_distance(&g, &opts), Some(1.0));
        assert_eq!(in_degree_percentile(&g, 0.9), 1);
        assert_eq!(ego_percentile(&g, 3, 0.1), 0);
    }

    #[test]
    fn hub_above_ninetieth_rank() {
        let edges: Vec<(u32, u32)> = (1..10).map(|i| (i, 0)).collect();
        assert_eq!(in_degree_percentile(&directed(10, &edges), 0.9), 0);
    }

    #[test]
    fn no_connected_pairs_has_no_distance() {
        let g = directed(3, &[]);
        let opts = MetricsOptions::default();
        assert_eq!(average_distance(&g, &opts), None);
        assert_eq!(unconnected_proportion(&g, &opts), 1.0);
    }

    #[test]
    fn sampling_kicks_in_above_threshold() {
        let g = four_cycle();
        let opts = MetricsOptions {
            exact_threshold: 2,
            sample_sources: 2,
            ..MetricsOptions::default()
        };
        let r = reachability(&g, &opts);
        assert!(r.sampled);
        assert_eq!(r.sources, 2);
        assert_eq!(r.unconnected, 0.0);
        assert_eq!(r.average_distance, Some(2.0));
    }

    #[test]
    fn report_flags_disconnected() {
        let g = directed(4, &[(0, 1), (2, 3)]);
        let r = graph_report(&g, 1, 0, Mode::Replacement, &MetricsOptions::default());
        assert_eq!(r.lambda2, 0.0);
        assert!(r.disconnected());
        assert!((r.lambda2_lcc - 2.0).abs() < 1e-12);
        assert!(pretty_table(&[("replacement".into(), r)]).contains('·'));
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("12,0;11,1").unwrap(), [(12, 0), (11, 1)]);
        assert_eq!(parse_sweep(" 4 , 0 ;").unwrap(), [(4, 0)]);
        assert!(parse_sweep("").is_err());
        assert!(parse_sweep("12-0").is_err());
        assert!(parse_sweep("0,0").is_err());
        assert_eq!(default_sweep().len(), 7);
        assert_eq!(default_sweep()[6], (6, 6));
    }

    #[test]
    fn csv_row_layout() {
        let r = graph_report(&four_cycle(), 4, 0, Mode::Expansion, &MetricsOptions::default());
        let row = csv_row(&r, mode_label(&r, true));
        assert!(row.starts_with("4,0,any,"), "{row}");
        assert!(row.ends_with(",0,2,1,3,false"), "{row}");
    }
}
