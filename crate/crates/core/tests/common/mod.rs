//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's graph, convexity or statistics code; each
//! oracle is the slow, obvious version of the quantity it checks.

#![allow(dead_code)]

pub mod cli;
pub mod fit;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: usize = usize::MAX / 4;

/// All-pairs hop distances by Floyd-Warshall.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(u, v) in edges {
        if u != v {
            d[u][v] = 1;
            d[v][u] = 1;
        }
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][m] + d[m][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

pub fn adjacency_matrix(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in edges {
        if u != v {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    a
}

/// Every shortest path from `s` to `t`, listed by depth-first enumeration.
pub fn all_shortest_paths(adj: &[Vec<bool>], dist: &[Vec<usize>], s: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if dist[s][t] >= INF {
        return out;
    }
    let mut path = vec![s];
    extend(adj, dist, t, &mut path, &mut out);
    out
}

fn extend(adj: &[Vec<bool>], dist: &[Vec<usize>], t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let u = *path.last().unwrap();
    if u == t {
        out.push(path.clone());
        return;
    }
    for v in 0..adj.len() {
        if adj[u][v] && dist[v][t] + 1 == dist[u][t] {
            path.push(v);
            extend(adj, dist, t, path, out);
            path.pop();
        }
    }
}

/// Largest count of vertices in `class` over all shortest s-t paths (endpoints included).
pub fn max_same_class_count(
    adj: &[Vec<bool>],
    dist: &[Vec<usize>],
    classes: &[u32],
    class: u32,
    s: usize,
    t: usize,
) -> Option<usize> {
    all_shortest_paths(adj, dist, s, t)
        .iter()
        .map(|p| p.iter().filter(|&&v| classes[v] == class).count())
        .max()
}

/// Mean over classes of the mean, over same-class pairs, of the best same-class share of a
/// shortest path. Classes with fewer than two members or no connected pair are skipped.
pub fn convexity_by_enumeration(n: usize, edges: &[(usize, usize)], classes: &[u32]) -> Option<f64> {
    let adj = adjacency_matrix(n, edges);
    let dist = floyd_warshall(n, edges);
    let mut distinct: Vec<u32> = classes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut class_scores = Vec::new();
    for &c in &distinct {
        let members: Vec<usize> = (0..n).filter(|&v| classes[v] == c).collect();
        let mut scores = Vec::new();
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let (s, t) = (members[a], members[b]);
                if let Some(cnt) = max_same_class_count(&adj, &dist, classes, c, s, t) {
                    scores.push(cnt as f64 / (dist[s][t] + 1) as f64);
                }
            }
        }
        if !scores.is_empty() {
            class_scores.push(scores.iter().sum::<f64>() / scores.len() as f64);
        }
    }
    (!class_scores.is_empty()).then(|| class_scores.iter().sum::<f64>() / class_scores.len() as f64)
}

/// Erdos-Renyi style random graph.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Textbook two-pass Pearson correlation.
pub fn pearson_naive(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Squared Euclidean distances from row `u` to all rows, in f64.
pub fn squared_distances(rows: &[Vec<f32>], u: usize) -> Vec<f64> {
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&rows[u])
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    d * d
                })
                .sum()
        })
        .collect()
}

/// Union-symmetrized kNN edge set from a full sort; ties go to the lower index.
pub fn knn_edges_by_sorting(rows: &[Vec<f32>], k: usize) -> Vec<(usize, usize)> {
    let n = rows.len();
    let mut edges = Vec::new();
    for u in 0..n {
        let d = squared_distances(rows, u);
        let mut order: Vec<usize> = (0..n).filter(|&v| v != u).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        for &v in &order[..k] {
            edges.push((u.min(v), u.max(v)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Smallest gap, over all rows, between the k-th and (k+1)-th neighbour distance.
pub fn knn_gap(rows: &[Vec<f32>], k: usize) -> f64 {
    (0..rows.len())
        .map(|u| {
            let mut d: Vec<f64> = squared_distances(rows, u)
                .into_iter()
                .enumerate()
                .filter(|&(v, _)| v != u)
                .map(|(_, x)| x.sqrt())
                .collect();
            d.sort_by(f64::total_cmp);
            d[k] - d[k - 1]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random orthogonal matrix (row-major) by Gram-Schmidt on Gaussian columns.
pub fn rotation(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// `R x + t` for every row.
pub fn rigid_motion(rows: &[Vec<f32>], r: &[Vec<f64>], t: &[f64]) -> Vec<Vec<f32>> {
    rows.iter()
        .map(|x| {
            r.iter()
                .zip(t)
                .map(|(ri, ti)| (ri.iter().zip(x).map(|(a, &b)| a * b as f64).sum::<f64>() + ti) as f32)
                .collect()
        })
        .collect()
}
