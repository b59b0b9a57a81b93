//! Minimum-weight perfect matching on the complete graph of co-schedulable
//! applications.
//!
//! The optimum is found with the blossom algorithm. Among optimal matchings,
//! the one whose sorted pair list is lexicographically smallest is returned,
//! so schedules are reproducible; [`brute_force_matching`] enumerates every
//! matching with the same rule and serves as a reference.

mod blossom;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blossom::max_weight_matching;

/// Largest graph [`brute_force_matching`] accepts (10395 matchings).
pub const BRUTE_FORCE_MAX: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchingError {
    #[error("perfect matching needs an even number of vertices, got {0}")]
    OddVertexCount(usize),
    #[error("graph has no vertices")]
    Empty,
    #[error("weight of edge ({0}, {1}) is not finite")]
    NonFiniteWeight(usize, usize),
    #[error("brute-force enumeration is limited to {max} vertices, got {n}")]
    TooLarge { n: usize, max: usize },
}

/// How two per-application slowdowns combine into an edge weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeight {
    #[default]
    Sum,
    Max,
    Product,
}

impl EdgeWeight {
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            EdgeWeight::Sum => a + b,
            EdgeWeight::Max => a.max(b),
            EdgeWeight::Product => a * b,
        }
    }
}

/// Complete graph with symmetric edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGraph {
    n: usize,
    weights: Vec<f64>,
}

impl PairGraph {
    /// Builds the graph from `weight(i, j)` evaluated for `i < j`.
    pub fn from_fn(n: usize, mut weight: impl FnMut(usize, usize) -> f64) -> Result<Self, MatchingError> {
        if n == 0 {
            return Err(MatchingError::Empty);
        }
        if n % 2 == 1 {
            return Err(MatchingError::OddVertexCount(n));
        }
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let w = weight(i, j);
                if !w.is_finite() {
                    return Err(MatchingError::NonFiniteWeight(i, j));
                }
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        Ok(Self { n, weights })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(i, j)| self.weight(i, j)).sum()
    }

    fn tolerance(&self, total: f64) -> f64 {
        1e-9 * (1.0 + total.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// Pairs `(i, j)` with `i < j`, sorted.
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

impl Matching {
    fn new(graph: &PairGraph, mut pairs: Vec<(usize, usize)>) -> Self {
        for p in pairs.iter_mut() {
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
        }
        pairs.sort_unstable();
        let total_weight = graph.total(&pairs);
        Self { pairs, total_weight }
    }

    pub fn partner(&self, v: usize) -> Option<usize> {
        self.pairs.iter().find_map(|&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Every vertex in `0..n` appears in exactly one pair.
    pub fn is_perfect(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &(a, b) in &self.pairs {
            for v in [a, b] {
                if v >= n || seen[v] {
                    return false;
                }
                seen[v] = true;
            }
        }
        seen.iter().all(|&s| s)
    }
}

/// Optimal perfect matching on the sub-graph induced by `vertices`.
fn blossom_on(graph: &PairGraph, vertices: &[usize]) -> Vec<(usize, usize)> {
    let k = vertices.len();
    if k == 0 {
        return Vec::new();
    }
    let mut max_w = f64::NEG_INFINITY;
    let mut min_w = f64::INFINITY;
    for a in 0..k {
        for b in a + 1..k {
            let w = graph.weight(vertices[a], vertices[b]);
            max_w = max_w.max(w);
            min_w = min_w.min(w);
        }
    }
    // maximizing (offset - w) over maximum-cardinality matchings minimizes
    // the total weight over perfect matchings
    let offset = max_w + 1.0 + (max_w - min_w);
    let mut edges = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            edges.push((a, b, offset - graph.weight(vertices[a], vertices[b])));
        }
    }
    let mate = max_weight_matching(k, &edges, true);
    let mut pairs = Vec::with_capacity(k / 2);
    for (a, m) in mate.iter().enumerate() {
        let b = m.expect("complete graph with even order has a perfect matching");
        if a < b {
            pairs.push((vertices[a], vertices[b]));
        }
    }
    pairs
}

/// Minimum-weight perfect matching, ties broken toward the lexicographically
/// smallest sorted pair list.
pub fn min_weight_perfect_matching(graph: &PairGraph) -> Result<Matching, MatchingError> {
    let all: Vec<usize> = (0..graph.n).collect();
    let optimum = Matching::new(graph, blossom_on(graph, &all));
    let target = optimum.total_weight;
    let tol = graph.tolerance(target);

    let mut remaining = all;
    let mut current = optimum.pairs;
    let mut fixed = 0.0;
    let mut chosen = Vec::with_capacity(graph.n / 2);
    while let Some(&u) = remaining.first() {
        let partner = current
            .iter()
            .find_map(|&(a, b)| (a == u).then_some(b).or((b == u).then_some(a)))
            .expect("current matching covers the remaining vertices");
        let mut pick = None;
        for &v in &remaining[1..] {
            if v == partner {
                break;
            }
            let rest: Vec<usize> = remaining.iter().copied().filter(|&x| x != u && x != v).collect();
            let sub = blossom_on(graph, &rest);
            if fixed + graph.weight(u, v) + graph.total(&sub) <= target + tol {
                pick = Some((v, sub));
                break;
            }
        }
        let v = match pick {
            Some((v, sub)) => {
                current = sub;
                v
            }
            None => {
                current.retain(|&(a, b)| a != u && b != u);
                partner
            }
        };
        fixed += graph.weight(u, v);
        chosen.push((u, v));
        remaining.retain(|&x| x != u && x != v);
    }
    Ok(Matching::new(graph, chosen))
}

fn enumerate(
    graph: &PairGraph,
    free: &mut Vec<usize>,
    pairs: &mut Vec<(usize, usize)>,
    visit: &mut dyn FnMut(&[(usize, usize)], f64) -> bool,
) -> bool {
    if free.is_empty() {
        return visit(pairs, graph.total(pairs));
    }
    let u = free.remove(0);
    for idx in 0..free.len() {
        let v = free.remove(idx);
        pairs.push((u, v));
        let stop = enumerate(graph, free, pairs, visit);
        pairs.pop();
        free.insert(idx, v);
        if stop {
            free.insert(0, u);
            return true;
        }
    }
    free.insert(0, u);
    false
}

/// Exhaustive minimum over all perfect matchings, in lexicographic order.
pub fn brute_force_matching(graph: &PairGraph) -> Result<Matching, MatchingError> {
    if graph.n > BRUTE_FORCE_MAX {
        return Err(MatchingError::TooLarge {
            n: graph.n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let mut free: Vec<usize> = (0..graph.n).collect();
    let mut pairs = Vec::new();
    let mut best = f64::INFINITY;
    enumerate(graph, &mut free, &mut pairs, &mut |_, total| {
        best = best.min(total);
        false
    });
    let tol = graph.tolerance(best);
    let mut found = None;
    enumerate(graph, &mut free, &mut pairs, &mut |p, total| {
        if total <= best + tol {
            found = Some(p.to_vec());
            true
        } else {
            false
        }
    });
    Ok(Matching::new(graph, found.expect("at least one perfect matching")))
}

/// Number of perfect matchings of the complete graph on `n` vertices.
pub fn perfect_matching_count(n: usize) -> u64 {
    (1..n as u64).step_by(2).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> PairGraph {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                w[i * n + j] = rng.random_range(0.0..10.0);
            }
        }
        PairGraph::from_fn(n, |i, j| w[i * n + j]).unwrap()
    }

    #[test]
    fn two_vertices() {
        let g = PairGraph::from_fn(2, |_, _| 3.0).unwrap();
        let m = min_weight_perfect_matching(&g).unwrap();
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert_eq!(m.total_weight, 3.0);
        assert_eq!(brute_force_matching(&g).unwrap(), m);
    }

    #[test]
    fn dominant_pairs() {
        let g = PairGraph::from_fn(4, |i, j| {
            if (i, j) == (0, 1) || (i, j) == (2, 3) {
                1.0
            } else {
                10.0
            }
        })
        .unwrap();
        let m = min_weight_perfect_matching(&g).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(m.total_weight, 2.0);
    }

    #[test]
    fn uniform_weights_tie_break() {
        let g = PairGraph::from_fn(4, |_, _| 5.0).unwrap();
        assert_eq!(brute_force_matching(&g).unwrap().pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(min_weight_perfect_matching(&g).unwrap().pairs, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn sum_of_indices_weights() {
        // every perfect matching has total 0+1+...+5 = 15
        let g = PairGraph::from_fn(6, |i, j| (i + j) as f64).unwrap();
        let mut totals = Vec::new();
        let mut free: Vec<usize> = (0..6).collect();
        enumerate(&g, &mut free, &mut Vec::new(), &mut |_, t| {
            totals.push(t);
            false
        });
        assert_eq!(totals.len(), 15);
        assert!(totals.iter().all(|&t| t == 15.0));
        let bf = brute_force_matching(&g).unwrap();
        assert_eq!(bf.pairs, vec![(0, 1), (2, 3), (4, 5)]);
        assert_eq!(min_weight_perfect_matching(&g).unwrap(), bf);
    }

    #[test]
    fn eight_vertices_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let g = random_graph(8, &mut rng);
        let mut count = 0;
        let mut free: Vec<usize> = (0..8).collect();
        enumerate(&g, &mut free, &mut Vec::new(), &mut |_, _| {
            count += 1;
            false
        });
        assert_eq!(count, 105);
        assert_eq!(perfect_matching_count(8), 105);
        assert_eq!(
            min_weight_perfect_matching(&g).unwrap(),
            brute_force_matching(&g).unwrap()
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            PairGraph::from_fn(3, |_, _| 1.0).unwrap_err(),
            MatchingError::OddVertexCount(3)
        );
        assert_eq!(PairGraph::from_fn(0, |_, _| 1.0).unwrap_err(), MatchingError::Empty);
        assert_eq!(
            PairGraph::from_fn(2, |_, _| f64::NAN).unwrap_err(),
            MatchingError::NonFiniteWeight(0, 1)
        );
        let g = PairGraph::from_fn(14, |_, _| 1.0).unwrap();
        assert!(matches!(
            brute_force_matching(&g),
            Err(MatchingError::TooLarge { n: 14, .. })
        ));
        assert!(min_weight_perfect_matching(&g).unwrap().is_perfect(14));
    }

    #[test]
    fn larger_graphs_are_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [16, 24, 32] {
            let g = random_graph(n, &mut rng);
            let m = min_weight_perfect_matching(&g).unwrap();
            assert!(m.is_perfect(n));
        }
    }

    #[test]
    fn edge_weight_combinations() {
        assert_eq!(EdgeWeight::Sum.combine(1.5, 2.0), 3.5);
        assert_eq!(EdgeWeight::Max.combine(1.5, 2.0), 2.0);
        assert_eq!(EdgeWeight::Product.combine(1.5, 2.0), 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn blossom_agrees_with_enumeration(seed in any::<u64>(), half in 1usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(2 * half, &mut rng);
            let bl = min_weight_perfect_matching(&g).unwrap();
            let bf = brute_force_matching(&g).unwrap();
            prop_assert!(bl.is_perfect(2 * half));
            prop_assert_eq!(bl, bf);
        }

        #[test]
        fn argmin_invariant_under_affine_maps(seed in any::<u64>(), scale in 0.1..50.0f64, shift in 0.0..20.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(8, &mut rng);
            let base = min_weight_perfect_matching(&g).unwrap().pairs;
            let scaled = PairGraph::from_fn(8, |i, j| g.weight(i, j) * scale).unwrap();
            let shifted = PairGraph::from_fn(8, |i, j| g.weight(i, j) + shift).unwrap();
            prop_assert_eq!(&min_weight_perfect_matching(&scaled).unwrap().pairs, &base);
            prop_assert_eq!(&min_weight_perfect_matching(&shifted).unwrap().pairs, &base);
        }
    }
}
