//! Graph convexity of labelled regions.
//!
//! For every pair of same-class vertices a shortest path is taken in the kNN
//! graph and the fraction of path vertices carrying that class is recorded.
//! A class scores the mean of these fractions over its connected pairs; a
//! graph scores the unweighted mean over classes.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NeighborGraph, PathMode};
use crate::stats;
use crate::summation;

/// Which path vertices enter the same-class proportion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointConvention {
    /// All path vertices; a direct edge scores 1.
    #[default]
    Include,
    /// Interior vertices only; a direct edge (no interior) scores 1.
    InteriorOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvexityConfig {
    pub mode: PathMode,
    /// Cap on same-class pairs per class, sampled without replacement. `None` = all pairs.
    pub max_pairs: Option<usize>,
    pub seed: u64,
    pub endpoints: EndpointConvention,
}

impl Default for ConvexityConfig {
    fn default() -> Self {
        Self {
            mode: PathMode::Arbitrary,
            max_pairs: None,
            seed: 0,
            endpoints: EndpointConvention::Include,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "score", rename_all = "snake_case")]
pub enum ClassOutcome {
    Scored(f64),
    /// Fewer than two members; nothing to measure.
    TooFewMembers,
    /// Every sampled pair was disconnected.
    AllDisconnected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConvexity {
    pub class: u32,
    pub members: usize,
    pub outcome: ClassOutcome,
    /// Connected pairs that contributed a proportion.
    pub pairs_evaluated: usize,
    pub pairs_disconnected: usize,
}

impl ClassConvexity {
    pub fn score(&self) -> Option<f64> {
        match self.outcome {
            ClassOutcome::Scored(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub per_class: BTreeMap<u32, ClassConvexity>,
    pub mean_score: f64,
    /// Standard error of the mean over scored classes; `None` with fewer than two.
    pub sem: Option<f64>,
    pub k: usize,
    pub config: ConvexityConfig,
}

fn proportion(same: usize, hops: usize, endpoints: EndpointConvention) -> f64 {
    match endpoints {
        EndpointConvention::Include => same as f64 / (hops + 1) as f64,
        EndpointConvention::InteriorOnly => {
            if hops <= 1 {
                1.0
            } else {
                (same - 2) as f64 / (hops - 1) as f64
            }
        }
    }
}

/// Same-class pairs `(a, b)` with `a < b`, grouped by `a`, as positions into `members`.
fn pair_plan(members: usize, max_pairs: Option<usize>, seed: u64, class: u32) -> Vec<(usize, Vec<usize>)> {
    let total = members * (members - 1) / 2;
    let mut plan: Vec<(usize, Vec<usize>)> = Vec::new();
    match max_pairs {
        Some(cap) if cap < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(class as u64);
            let mut picks = index::sample(&mut rng, total, cap).into_vec();
            picks.sort_unstable();
            // Decode lexicographic pair indices: row `a` holds `members - 1 - a` pairs.
            let mut a = 0usize;
            let mut row_start = 0usize;
            for p in picks {
                while p >= row_start + (members - 1 - a) {
                    row_start += members - 1 - a;
                    a += 1;
                }
                let b = a + 1 + (p - row_start);
                match plan.last_mut() {
                    Some((src, targets)) if *src == a => targets.push(b),
                    _ => plan.push((a, vec![b])),
                }
            }
        }
        _ => {
            for a in 0..members.saturating_sub(1) {
                plan.push((a, (a + 1..members).collect()));
            }
        }
    }
    plan
}

/// Per-pair proportions for one source vertex; `None` marks a disconnected pair.
fn source_proportions(
    graph: &NeighborGraph,
    classes: &[u32],
    class: u32,
    source: usize,
    targets: &[usize],
    mode: PathMode,
    endpoints: EndpointConvention,
) -> Vec<Option<f64>> {
    let (dist, counts) = match mode {
        PathMode::Arbitrary => {
            let tree = graph.bfs(source);
            let counts = tree.count_along(|v| classes[v] == class);
            (tree.dist, counts)
        }
        PathMode::MaxSameClass => {
            let dag = graph.same_class_dag(source, classes);
            (dag.tree.dist, dag.best)
        }
    };
    targets
        .iter()
        .map(|&t| (dist[t] != usize::MAX).then(|| proportion(counts[t], dist[t], endpoints)))
        .collect()
}

/// Convexity of a single class.
pub fn class_convexity(
    graph: &NeighborGraph,
    classes: &[u32],
    class: u32,
    config: &ConvexityConfig,
) -> Result<ClassConvexity> {
    if classes.len() != graph.len() {
        return Err(Error::Parameter(format!(
            "{} vertex classes for a graph of {} vertices",
            classes.len(),
            graph.len()
        )));
    }
    let members: Vec<usize> = (0..classes.len()).filter(|&v| classes[v] == class).collect();
    if members.len() < 2 {
        warn!("class {class} has {} member(s); skipped", members.len());
        return Ok(ClassConvexity {
            class,
            members: members.len(),
            outcome: ClassOutcome::TooFewMembers,
            pairs_evaluated: 0,
            pairs_disconnected: 0,
        });
    }

    let plan = pair_plan(members.len(), config.max_pairs, config.seed, class);
    let per_source: Vec<Vec<Option<f64>>> = plan
        .par_iter()
        .map(|(a, bs)| {
            let targets: Vec<usize> = bs.iter().map(|&b| members[b]).collect();
            source_proportions(
                graph,
                classes,
                class,
                members[*a],
                &targets,
                config.mode,
                config.endpoints,
            )
        })
        .collect();

    let mut sum = summation::NeumaierSum::new();
    let mut evaluated = 0usize;
    let mut disconnected = 0usize;
    for p in per_source.into_iter().flatten() {
        match p {
            Some(v) => {
                sum.add(v);
                evaluated += 1;
            }
            None => disconnected += 1,
        }
    }
    let outcome = if evaluated == 0 {
        warn!("class {class}: all {disconnected} pairs disconnected");
        ClassOutcome::AllDisconnected
    } else {
        ClassOutcome::Scored(sum.total() / evaluated as f64)
    };
    Ok(ClassConvexity {
        class,
        members: members.len(),
        outcome,
        pairs_evaluated: evaluated,
        pairs_disconnected: disconnected,
    })
}

/// Convexity of every class present in `classes`, with mean and SEM across classes.
pub fn convexity_score(
    graph: &NeighborGraph,
    classes: &[u32],
    config: &ConvexityConfig,
) -> Result<ConvexityReport> {
    let mut present: Vec<u32> = classes.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Parameter(format!(
            "convexity needs at least 2 classes, found {}",
            present.len()
        )));
    }
    let per_class = present
        .par_iter()
        .map(|&c| class_convexity(graph, classes, c, config).map(|r| (c, r)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let scores: Vec<f64> = per_class.values().filter_map(ClassConvexity::score).collect();
    let mean_score = summation::mean(&scores)
        .ok_or_else(|| Error::Parameter("no class produced a convexity score".into()))?;
    let sem = stats::sem(&scores).ok();
    Ok(ConvexityReport {
        per_class,
        mean_score,
        sem,
        k: graph.k(),
        config: *config,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub mean: f64,
    /// Sample standard deviation across trials (0 for a single trial).
    pub std: f64,
    pub trials: usize,
    pub seed: u64,
    pub scores: Vec<f64>,
}

/// Mean convexity under random label permutations that keep class sizes fixed.
pub fn permutation_baseline(
    graph: &NeighborGraph,
    classes: &[u32],
    trials: usize,
    seed: u64,
    config: &ConvexityConfig,
) -> Result<BaselineReport> {
    if trials == 0 {
        return Err(Error::Parameter("permutation baseline needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let permutations: Vec<Vec<u32>> = (0..trials)
        .map(|_| {
            let mut shuffled = classes.to_vec();
            shuffled.shuffle(&mut rng);
            shuffled
        })
        .collect();
    let scores = permutations
        .par_iter()
        .map(|labels| convexity_score(graph, labels, config).map(|r| r.mean_score))
        .collect::<Result<Vec<f64>>>()?;
    let mean = summation::mean(&scores).unwrap();
    let std = if trials == 1 {
        0.0
    } else {
        stats::sample_std(&scores).unwrap_or(0.0)
    };
    Ok(BaselineReport {
        mean,
        std,
        trials,
        seed,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> NeighborGraph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        NeighborGraph::from_edges(n, &edges, 1).unwrap()
    }

    #[test]
    fn isolated_clique_scores_one() {
        // Two disjoint triangles with one bridge; each class is its own triangle.
        let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)];
        let g = NeighborGraph::from_edges(6, &edges, 2).unwrap();
        let classes = [0, 0, 0, 1, 1, 1];
        let report = convexity_score(&g, &classes, &ConvexityConfig::default()).unwrap();
        assert_eq!(report.mean_score, 1.0);
        assert_eq!(report.sem, Some(0.0));
    }

    #[test]
    fn a_b_a_path_scores_two_thirds() {
        let g = path_graph(3);
        let r = class_convexity(&g, &[0, 1, 0], 0, &ConvexityConfig::default()).unwrap();
        assert_eq!(r.score(), Some(2.0 / 3.0));
        assert_eq!(r.pairs_evaluated, 1);
        let interior = ConvexityConfig {
            endpoints: EndpointConvention::InteriorOnly,
            ..Default::default()
        };
        assert_eq!(class_convexity(&g, &[0, 1, 0], 0, &interior).unwrap().score(), Some(0.0));
    }

    #[test]
    fn direct_edge_scores_one() {
        let g = path_graph(2);
        let r = class_convexity(&g, &[3, 3], 3, &ConvexityConfig::default()).unwrap();
        assert_eq!(r.score(), Some(1.0));
    }

    #[test]
    fn alternating_line_by_hand() {
        // Six points on a line alternating A,B,A,B,A,B with k=2 neighbours each.
        let set = crate::embedding::EmbeddingSet::from_rows(
            &(0..6).map(|i| vec![i as f32]).collect::<Vec<_>>(),
        )
        .unwrap();
        let g = crate::graph::build_knn_graph(&set, 2).unwrap();
        // 1 and 4 have both of their k=2 neighbours at distance 1, so 1-3 and 2-4 are absent.
        assert_eq!(
            g.edges(),
            vec![(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)]
        );
        let classes = [0, 1, 0, 1, 0, 1];
        let report = convexity_score(&g, &classes, &ConvexityConfig::default()).unwrap();
        // A = {0,2,4}: (0,2) direct = 1; (2,4) via 3 = 2/3; (0,4) BFS path 0-2-3-4 = 3/4.
        // B = {1,3,5}: (1,3) via 2 = 2/3; (1,5) BFS path 1-2-3-5 = 3/4; (3,5) direct = 1.
        let expected = (1.0 + 2.0 / 3.0 + 3.0 / 4.0) / 3.0;
        assert!((report.per_class[&0].score().unwrap() - expected).abs() < 1e-15);
        assert!((report.per_class[&1].score().unwrap() - expected).abs() < 1e-15);
        assert!((report.mean_score - expected).abs() < 1e-15);

        let g1 = crate::graph::build_knn_graph(&set, 1).unwrap();
        // k=1: path graph 0-1-2-3-4-5. Class A pairs: (0,2): 2/3, (2,4): 2/3, (0,4): 3/5.
        let r = convexity_score(&g1, &classes, &ConvexityConfig::default()).unwrap();
        let expected = (2.0 / 3.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0;
        assert!((r.per_class[&0].score().unwrap() - expected).abs() < 1e-15);
        assert!((r.per_class[&1].score().unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn small_and_disconnected_classes_are_reported() {
        let g = NeighborGraph::from_edges(5, &[(0, 1), (2, 3)], 1).unwrap();
        let classes = [0, 1, 0, 1, 2];
        let report = convexity_score(&g, &classes, &ConvexityConfig::default()).unwrap_err();
        assert!(matches!(report, Error::Parameter(_)));

        let g = NeighborGraph::from_edges(5, &[(0, 1), (1, 2), (3, 4)], 1).unwrap();
        let classes = [0, 0, 1, 1, 2];
        let report = convexity_score(&g, &classes, &ConvexityConfig::default()).unwrap();
        assert_eq!(report.per_class[&2].outcome, ClassOutcome::TooFewMembers);
        assert_eq!(report.per_class[&1].outcome, ClassOutcome::AllDisconnected);
        assert_eq!(report.per_class[&1].pairs_disconnected, 1);
        assert_eq!(report.mean_score, 1.0);
        assert_eq!(report.sem, None);
    }

    #[test]
    fn single_class_is_rejected() {
        let g = path_graph(3);
        assert!(matches!(
            convexity_score(&g, &[0, 0, 0], &ConvexityConfig::default()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn pair_plan_decodes_all_sampled_pairs() {
        let full = pair_plan(6, None, 0, 0);
        let all: Vec<(usize, usize)> = full
            .iter()
            .flat_map(|(a, bs)| bs.iter().map(move |&b| (*a, b)))
            .collect();
        assert_eq!(all.len(), 15);
        let sampled = pair_plan(6, Some(7), 42, 3);
        let picked: Vec<(usize, usize)> = sampled
            .iter()
            .flat_map(|(a, bs)| bs.iter().map(move |&b| (*a, b)))
            .collect();
        assert_eq!(picked.len(), 7);
        assert!(picked.iter().all(|p| all.contains(p)));
        let mut dedup = picked.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 7);
        assert_eq!(pair_plan(6, Some(7), 42, 3), sampled);
    }

    #[test]
    fn complete_graph_baseline_is_one() {
        let n = 8;
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let g = NeighborGraph::from_edges(n, &edges, n - 1).unwrap();
        let classes = [0, 0, 0, 0, 1, 1, 1, 1];
        let b = permutation_baseline(&g, &classes, 5, 1, &ConvexityConfig::default()).unwrap();
        assert_eq!(b.mean, 1.0);
        assert_eq!(b.std, 0.0);
        let one = permutation_baseline(&g, &classes, 1, 1, &ConvexityConfig::default()).unwrap();
        assert_eq!(one.std, 0.0);
        assert!(permutation_baseline(&g, &classes, 0, 1, &ConvexityConfig::default()).is_err());
    }
}
