//! Euclidean k-nearest-neighbour graph and hop-count shortest paths.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

/// How a shortest path is chosen when several minimum-hop paths exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// BFS tree path, neighbours expanded in ascending index order.
    #[default]
    Arbitrary,
    /// Among all minimum-hop paths, one with the most vertices of the source's class.
    MaxSameClass,
}

/// Undirected kNN graph; vertex `i` is row `i` of the embedding set it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<usize>>,
    k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathResult {
    pub path: Vec<usize>,
    pub hops: usize,
}

/// Outcome of a single shortest-path query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathOutcome {
    Found(PathResult),
    Disconnected,
}

impl NeighborGraph {
    /// Builds a graph from undirected edges; adjacency is symmetrized, sorted and deduplicated.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], k: usize) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Parameter(format!("edge ({u},{v}) out of range for {n} vertices")));
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency, k })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    /// Edge list as `u,v` CSV.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("u,v\n");
        for (u, v) in self.edges() {
            writeln!(out, "{u},{v}").unwrap();
        }
        out
    }

    /// Hop distances from `source` (`usize::MAX` when unreachable) and BFS-tree parents.
    pub fn bfs(&self, source: usize) -> BfsTree {
        let n = self.len();
        let mut dist = vec![usize::MAX; n];
        let mut parent = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        BfsTree {
            source,
            dist,
            parent,
            order,
        }
    }

    /// Single-source search that also maximizes, along minimum-hop paths, the number of
    /// vertices whose class equals the source's.
    ///
    /// `best[v]` is the largest same-class count over all shortest source→v paths
    /// (endpoints included); `pred[v]` is the lowest-index predecessor achieving it.
    pub fn same_class_dag(&self, source: usize, classes: &[u32]) -> SameClassDag {
        let tree = self.bfs(source);
        let class = classes[source];
        let n = self.len();
        let mut best = vec![0usize; n];
        let mut pred = vec![usize::MAX; n];
        best[source] = 1;
        // BFS order visits every vertex after all of its shortest-path predecessors.
        for &v in tree.order.iter().skip(1) {
            let dv = tree.dist[v];
            let mut best_pred = usize::MAX;
            let mut best_count = 0usize;
            for &p in &self.adjacency[v] {
                if tree.dist[p] != usize::MAX && tree.dist[p] + 1 == dv {
                    // Adjacency is ascending, so strict `>` keeps the lowest index on ties.
                    if best_pred == usize::MAX || best[p] > best_count {
                        best_pred = p;
                        best_count = best[p];
                    }
                }
            }
            pred[v] = best_pred;
            best[v] = best_count + usize::from(classes[v] == class);
        }
        SameClassDag { tree, best, pred }
    }

    pub fn shortest_path(
        &self,
        source: usize,
        target: usize,
        mode: PathMode,
        classes: Option<&[u32]>,
    ) -> Result<PathOutcome> {
        let n = self.len();
        if source >= n || target >= n {
            return Err(Error::Parameter(format!(
                "vertices ({source},{target}) out of range for {n} vertices"
            )));
        }
        match mode {
            PathMode::Arbitrary => Ok(self.bfs(source).path_to(target)),
            PathMode::MaxSameClass => {
                let classes = classes.ok_or_else(|| {
                    Error::Parameter("max_same_class mode requires vertex classes".into())
                })?;
                if classes.len() != n {
                    return Err(Error::Parameter(format!(
                        "{} vertex classes for {n} vertices",
                        classes.len()
                    )));
                }
                Ok(self.same_class_dag(source, classes).path_to(target))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfsTree {
    pub source: usize,
    pub dist: Vec<usize>,
    pub parent: Vec<usize>,
    /// Vertices in the order they were dequeued.
    pub order: Vec<usize>,
}

fn trace_back(source: usize, target: usize, link: &[usize]) -> Vec<usize> {
    let mut path = vec![target];
    let mut v = target;
    while v != source {
        v = link[v];
        path.push(v);
    }
    path.reverse();
    path
}

impl BfsTree {
    pub fn reachable(&self, v: usize) -> bool {
        self.dist[v] != usize::MAX
    }

    pub fn path_to(&self, target: usize) -> PathOutcome {
        if !self.reachable(target) {
            return PathOutcome::Disconnected;
        }
        PathOutcome::Found(PathResult {
            path: trace_back(self.source, target, &self.parent),
            hops: self.dist[target],
        })
    }

    /// Number of vertices on the tree path to `target` satisfying `pred`, endpoints included.
    pub fn count_along(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut counts = vec![0usize; self.dist.len()];
        for &v in &self.order {
            let base = if v == self.source { 0 } else { counts[self.parent[v]] };
            counts[v] = base + usize::from(pred(v));
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct SameClassDag {
    pub tree: BfsTree,
    pub best: Vec<usize>,
    pub pred: Vec<usize>,
}

impl SameClassDag {
    pub fn path_to(&self, target: usize) -> PathOutcome {
        if !self.tree.reachable(target) {
            return PathOutcome::Disconnected;
        }
        PathOutcome::Found(PathResult {
            path: trace_back(self.tree.source, target, &self.pred),
            hops: self.tree.dist[target],
        })
    }
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// The `k` nearest other rows of `u`, ordered by (distance, index).
fn nearest(set: &EmbeddingSet, u: usize, k: usize) -> Vec<usize> {
    let x = set.row(u);
    let mut cand: Vec<(f64, usize)> = (0..set.len())
        .filter(|&v| v != u)
        .map(|v| (squared_distance(x, set.row(v)), v))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, v)| v).collect()
}

/// Exact kNN graph under Euclidean distance, symmetrized by union.
///
/// Distance ties are broken towards the lower row index.
pub fn build_knn_graph(set: &EmbeddingSet, k: usize) -> Result<NeighborGraph> {
    let n = set.len();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("k must satisfy 0 < k < n (k={k}, n={n})")));
    }
    let lists: Vec<Vec<usize>> = (0..n).into_par_iter().map(|u| nearest(set, u, k)).collect();
    let mut adjacency = vec![Vec::with_capacity(2 * k); n];
    for (u, list) in lists.iter().enumerate() {
        for &v in list {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    Ok(NeighborGraph { adjacency, k })
}
