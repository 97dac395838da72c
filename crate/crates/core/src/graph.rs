//! Graph and dataset domain types.
//!
//! A [`Graph`] stores an undirected structure as a symmetric, deduplicated,
//! sorted list of directed pairs. Node labels and the graph class label are
//! dense ids produced by the dataset parser. Values are immutable after
//! construction and safe to share across threads.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub id: usize,
    pub num_nodes: usize,
    /// Directed pairs; `(u, v)` present iff `(v, u)` present. Sorted, no
    /// duplicates, no self-loops.
    pub edges: Vec<(usize, usize)>,
    /// Dense categorical label per node.
    pub node_labels: Vec<usize>,
    /// Dense class id in `[0, num_classes)`.
    pub label: usize,
}

impl Graph {
    /// Builds a graph from undirected edges, symmetrizing and deduplicating.
    /// Rejects out-of-range endpoints and self-loops.
    pub fn new(
        id: usize,
        num_nodes: usize,
        undirected_edges: &[(usize, usize)],
        node_labels: Vec<usize>,
        label: usize,
    ) -> Result<Self> {
        if node_labels.len() != num_nodes {
            return Err(Error::Invariant(format!(
                "graph {id}: {} node labels for {num_nodes} nodes",
                node_labels.len()
            )));
        }
        let mut set = BTreeSet::new();
        for &(u, v) in undirected_edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Invariant(format!(
                    "graph {id}: edge ({u}, {v}) outside [0, {num_nodes})"
                )));
            }
            if u == v {
                return Err(Error::Invariant(format!("graph {id}: self-loop at {u}")));
            }
            set.insert((u, v));
            set.insert((v, u));
        }
        Ok(Self {
            id,
            num_nodes,
            edges: set.into_iter().collect(),
            node_labels,
            label,
        })
    }

    /// Number of undirected edges (half the directed pair count).
    pub fn num_edge_pairs(&self) -> usize {
        self.edges.len() / 2
    }

    /// Neighbor lists in ascending order, one per node.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
        }
        adj
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub num_node_labels: usize,
    /// Arithmetic mean of `num_nodes` over all graphs.
    pub mean_nodes: f64,
}

impl Dataset {
    /// Assembles a dataset from graphs that already carry dense label ids.
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Invariant("dataset has no graphs".into()));
        }
        let num_classes = graphs.iter().map(|g| g.label).max().unwrap() + 1;
        let num_node_labels = graphs
            .iter()
            .flat_map(|g| g.node_labels.iter().copied())
            .max()
            .map_or(0, |m| m + 1)
            .max(1);
        let total_nodes: usize = graphs.iter().map(|g| g.num_nodes).sum();
        let mean_nodes = total_nodes as f64 / graphs.len() as f64;
        if mean_nodes <= 0.0 {
            return Err(Error::Invariant("dataset mean_nodes must be > 0".into()));
        }
        Ok(Self {
            name: name.into(),
            graphs,
            num_classes,
            num_node_labels,
            mean_nodes,
        })
    }
}

/// One-hot node feature rows; row `i` is the indicator of node `i`'s label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<S> {
    matrix: Matrix<S>,
}

impl<S: Scalar> FeatureMatrix<S> {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn as_matrix(&self) -> &Matrix<S> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<S> {
        self.matrix
    }

    /// Restricts to the given rows, preserving their order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut m = Matrix::zeros(rows.len(), self.cols());
        for (new_i, &old_i) in rows.iter().enumerate() {
            m.row_mut(new_i).copy_from_slice(self.matrix.row(old_i));
        }
        Self { matrix: m }
    }
}

/// Builds the one-hot feature matrix for a graph.
pub fn one_hot_features<S: Scalar>(g: &Graph, num_node_labels: usize) -> Result<FeatureMatrix<S>> {
    let mut m = Matrix::zeros(g.num_nodes, num_node_labels);
    for (i, &lab) in g.node_labels.iter().enumerate() {
        if lab >= num_node_labels {
            return Err(Error::Invariant(format!(
                "graph {}: node {i} has label {lab} >= num_node_labels {num_node_labels}",
                g.id
            )));
        }
        m[(i, lab)] = S::one();
    }
    Ok(FeatureMatrix { matrix: m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_rows_are_indicators() {
        let g = Graph::new(0, 2, &[(0, 1)], vec![0, 2], 0).unwrap();
        let f = one_hot_features::<f64>(&g, 3).unwrap();
        assert_eq!(f.as_matrix().row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(f.as_matrix().row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn one_hot_identical_rows_for_same_labels() {
        let g = Graph::new(0, 3, &[(0, 1), (1, 2)], vec![1, 1, 1], 0).unwrap();
        let f = one_hot_features::<f64>(&g, 2).unwrap();
        assert_eq!(f.as_matrix().row(0), f.as_matrix().row(1));
        assert_eq!(f.as_matrix().row(1), f.as_matrix().row(2));
    }

    #[test]
    fn one_hot_rejects_out_of_range_label() {
        let g = Graph::new(0, 1, &[], vec![5], 0).unwrap();
        assert!(matches!(
            one_hot_features::<f64>(&g, 3),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn graph_symmetrizes_and_sorts_edges() {
        let g = Graph::new(0, 3, &[(2, 0), (0, 1)], vec![0, 0, 0], 0).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (1, 0), (2, 0)]);
        assert_eq!(g.num_edge_pairs(), 2);
    }

    #[test]
    fn graph_rejects_self_loop_and_out_of_range() {
        assert!(Graph::new(0, 2, &[(0, 0)], vec![0, 0], 0).is_err());
        assert!(Graph::new(0, 2, &[(0, 2)], vec![0, 0], 0).is_err());
    }
}
