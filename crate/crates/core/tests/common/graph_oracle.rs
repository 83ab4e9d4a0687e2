//! Brute-force graph metrics on adjacency matrices.

use rand::Rng;

/// Directed simple adjacency matrix.
pub type Adjacency = Vec<Vec<bool>>;

pub fn adjacency(n: usize, edges: &[(u32, u32)]) -> Adjacency {
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in edges {
        a[u as usize][v as usize] = true;
    }
    a
}

pub fn random_edges<R: Rng>(rng: &mut R, n: usize, density: f64) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                edges.push((u as u32, v as u32));
                if rng.gen_bool(0.1) {
                    // duplicate edge, must collapse
                    edges.push((u as u32, v as u32));
                }
            }
        }
    }
    edges
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[p][q] * a[p][q];
                }
            }
        }
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Closure under undirected reachability is used only to decide connectivity.
fn undirected_connected(a: &Adjacency) -> bool {
    let n = a.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = i == j || a[i][j] || a[j][i];
        }
    }
    // Warshall transitive closure
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
            }
        }
    }
    reach.iter().all(|row| row.iter().all(|&r| r))
}

/// λ2 of the unnormalized Laplacian of the symmetrized graph, 0 when
/// disconnected.
pub fn lambda2(a: &Adjacency) -> f64 {
    let n = a.len();
    if n < 2 || !undirected_connected(a) {
        return 0.0;
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && (a[i][j] || a[j][i]) {
                l[i][j] = -1.0;
                l[i][i] += 1.0;
            }
        }
    }
    jacobi_eigenvalues(l)[1]
}

/// All-pairs shortest path lengths by Floyd–Warshall.
pub fn floyd_warshall(a: &Adjacency) -> Vec<Vec<Option<usize>>> {
    let n = a.len();
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        d[i][i] = Some(0);
        for j in 0..n {
            if a[i][j] && i != j {
                d[i][j] = Some(1);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|cur| x + y < cur) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

/// `(unconnected proportion, average distance over reachable ordered pairs)`.
pub fn reachability(a: &Adjacency) -> (f64, Option<f64>) {
    let n = a.len();
    let d = floyd_warshall(a);
    let mut unreachable = 0usize;
    let mut total = 0usize;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            match d[i][j] {
                Some(x) => {
                    total += x;
                    pairs += 1;
                }
                None => unreachable += 1,
            }
        }
    }
    let uc = unreachable as f64 / (n * (n - 1)) as f64;
    let dist = (pairs > 0).then(|| total as f64 / pairs as f64);
    (uc, dist)
}

/// Smallest value `v` with at least `q·n` of the values `<= v`.
pub fn percentile_by_count(values: &[usize], q: f64) -> usize {
    let n = values.len();
    let mut candidates: Vec<usize> = values.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    for v in candidates {
        let at_most = values.iter().filter(|&&x| x <= v).count();
        if at_most as f64 >= q * n as f64 - 1e-9 {
            return v;
        }
    }
    0
}

pub fn in_degrees(a: &Adjacency) -> Vec<usize> {
    let n = a.len();
    (0..n).map(|j| (0..n).filter(|&i| a[i][j]).count()).collect()
}

/// Nodes reachable within `radius` steps, excluding the node itself, using
/// boolean matrix powers.
pub fn ego_counts(a: &Adjacency, radius: usize) -> Vec<usize> {
    let n = a.len();
    let mut within: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    for _ in 0..radius {
        let mut next = within.clone();
        for i in 0..n {
            for k in 0..n {
                if within[i][k] {
                    for j in 0..n {
                        if a[k][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        within = next;
    }
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i && within[i][j]).count())
        .collect()
}
