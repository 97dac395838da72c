//! Small synthetic corpora for demos and smoke tests.

use rand::Rng;

use crate::graph::{Dataset, Graph};
use crate::seeds;

/// A linearly separable two-class corpus: class `c` graphs carry node
/// label `c` everywhere, on a ring plus a few random chords. Graph ids
/// alternate classes.
pub fn two_class_dataset(num_graphs: usize, nodes_per_graph: usize, seed: u64) -> Dataset {
    let n = nodes_per_graph.max(3);
    let graphs = (0..num_graphs)
        .map(|id| {
            let mut rng = seeds::rng(seed, id as u64);
            let class = id % 2;
            let mut edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
            for _ in 0..n / 3 {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u != v {
                    edges.push((u.min(v), u.max(v)));
                }
            }
            Graph::new(id, n, &edges, vec![class; n], class).expect("valid by construction")
        })
        .collect();
    Dataset::new("synthetic-two-class", graphs).expect("non-empty")
}
