//! Synthetic graph and collection generators, used by the test suites,
//! benchmarks, and the Python smoke script.

use rand::Rng;

use crate::graph::{DirectedGraph, Village, VillageCollection};

/// Directed cycle 0 -> 1 -> ... -> n-1 -> 0.
pub fn cycle_graph(n: usize) -> DirectedGraph {
    let edges = (0..n).map(|v| (v, (v + 1) % n)).collect();
    DirectedGraph::new(n, edges).expect("cycle edges are valid")
}

/// G(n, p) directed graph: each ordered pair (u, v), u != v, is an edge
/// independently with probability `p`.
pub fn random_gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> DirectedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    DirectedGraph::new(n, edges).expect("gnp edges are valid")
}

/// A directed graph with skewed in-degrees: each node sends `out_degree`
/// edges whose targets are chosen preferentially (probability proportional
/// to current in-degree plus one). Mimics the shape of survey-elicited
/// village networks, where a few residents are named by many others.
pub fn random_preferential<R: Rng + ?Sized>(
    n: usize,
    out_degree: usize,
    rng: &mut R,
) -> DirectedGraph {
    assert!(out_degree < n, "out_degree must be < n");
    let mut in_plus_one = vec![1.0f64; n];
    let mut total = n as f64;
    let mut edges = Vec::new();
    let mut chosen = vec![false; n];
    for u in 0..n {
        let mut picked = Vec::with_capacity(out_degree);
        while picked.len() < out_degree {
            let mut x = rng.random::<f64>() * total;
            let mut v = 0;
            while v + 1 < n && x >= in_plus_one[v] {
                x -= in_plus_one[v];
                v += 1;
            }
            if v == u || chosen[v] {
                continue;
            }
            chosen[v] = true;
            picked.push(v);
        }
        for &v in &picked {
            chosen[v] = false;
            edges.push((u, v));
            in_plus_one[v] += 1.0;
            total += 1.0;
        }
    }
    DirectedGraph::new(n, edges).expect("preferential edges are valid")
}

/// A collection of preferential-attachment villages with varied sizes,
/// loosely matching the scale of the insurance-study networks (tens of
/// nodes, skewed in-degree).
pub fn village_collection<R: Rng + ?Sized>(
    n_villages: usize,
    min_nodes: usize,
    max_nodes: usize,
    out_degree: usize,
    rng: &mut R,
) -> VillageCollection {
    let villages = (0..n_villages)
        .map(|i| {
            let n = rng.random_range(min_nodes..=max_nodes);
            Village {
                id: format!("v{i:04}"),
                labels: (0..n).map(|j| format!("h{j}")).collect(),
                graph: random_preferential(n, out_degree.min(n - 1), rng),
            }
        })
        .collect();
    VillageCollection::new(villages).expect("generated ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cycle_has_regular_degrees() {
        let g = cycle_graph(5);
        assert_eq!(g.edge_count(), 5);
        for v in 0..5 {
            assert_eq!(g.in_degree(v), 1);
            assert_eq!(g.out_degree(v), 1);
        }
    }

    #[test]
    fn preferential_has_fixed_out_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_preferential(20, 3, &mut rng);
        assert_eq!(g.edge_count(), 60);
        for v in 0..20 {
            assert_eq!(g.out_degree(v), 3);
        }
        // in-degrees should be skewed: max well above the mean of 3
        let max_in = (0..20).map(|v| g.in_degree(v)).max().unwrap();
        assert!(max_in >= 5, "expected skewed in-degree, max was {max_in}");
    }

    #[test]
    fn village_collection_sizes_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let coll = village_collection(10, 8, 15, 3, &mut rng);
        assert_eq!(coll.len(), 10);
        for v in coll.iter() {
            assert!((8..=15).contains(&v.graph.node_count()));
        }
    }
}
