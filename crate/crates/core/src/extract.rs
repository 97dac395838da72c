//! Subgraph extraction: BFS balls around random start nodes, and fixed-size
//! windows slid over the node index order. Both inherit the parent graph's
//! class label, which is the weak supervision signal the trainer consumes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, FeatureMatrix, Graph};
use crate::scalar::Scalar;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bfs,
    SlidingWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub method: Method,
    /// Hop bound for BFS extraction.
    pub depth_limit: usize,
    /// BFS start nodes drawn per graph (with replacement).
    pub samples_per_graph: usize,
    /// Subgraphs with fewer nodes are discarded.
    pub min_nodes: usize,
    /// Subgraphs with fewer undirected edges are discarded.
    pub min_edges: usize,
    /// Window length in nodes for sliding-window extraction.
    pub window_size: usize,
    /// Offset between consecutive window starts.
    pub step_size: usize,
    pub seed: u64,
}

impl ExtractionConfig {
    pub fn bfs(depth_limit: usize) -> Self {
        Self {
            method: Method::Bfs,
            depth_limit,
            samples_per_graph: 5,
            min_nodes: 5,
            min_edges: 4,
            window_size: 1,
            step_size: 1,
            seed: 0,
        }
    }

    pub fn sliding(window_size: usize) -> Self {
        Self {
            method: Method::SlidingWindow,
            depth_limit: 0,
            samples_per_graph: 1,
            min_nodes: 5,
            min_edges: 4,
            window_size,
            step_size: (window_size / 2).max(1),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size < 1 {
            return Err(Error::Config("window_size must be >= 1".into()));
        }
        if self.step_size < 1 {
            return Err(Error::Config("step_size must be >= 1".into()));
        }
        if self.samples_per_graph < 1 {
            return Err(Error::Config("samples_per_graph must be >= 1".into()));
        }
        Ok(())
    }
}

/// Induced subgraph re-indexed to local node ids, carrying its parent's
/// class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph<S> {
    pub parent_id: usize,
    /// Original node index at each local position; entries distinct,
    /// ascending.
    pub node_map: Vec<usize>,
    /// Re-indexed symmetric directed pairs, sorted.
    pub edges: Vec<(usize, usize)>,
    pub features: FeatureMatrix<S>,
    /// Inherited parent class id.
    pub label: usize,
}

impl<S: Scalar> Subgraph<S> {
    pub fn num_nodes(&self) -> usize {
        self.node_map.len()
    }

    pub fn num_edge_pairs(&self) -> usize {
        self.edges.len() / 2
    }

    /// Treats a whole graph as a single instance; used by the baseline mode
    /// and the zero-subgraph evaluation fallback.
    pub fn whole_graph(g: &Graph, feats: &FeatureMatrix<S>) -> Self {
        Self {
            parent_id: g.id,
            node_map: (0..g.num_nodes).collect(),
            edges: g.edges.clone(),
            features: feats.clone(),
            label: g.label,
        }
    }
}

/// Dispatches on `cfg.method` with the per-graph random stream derived from
/// `(cfg.seed, g.id)`, so extraction over many graphs is order-independent.
pub fn extract_subgraphs<S: Scalar>(
    g: &Graph,
    feats: &FeatureMatrix<S>,
    cfg: &ExtractionConfig,
) -> Result<Vec<Subgraph<S>>> {
    cfg.validate()?;
    Ok(match cfg.method {
        Method::Bfs => {
            let mut rng = seeds::rng(cfg.seed, g.id as u64);
            bfs_extract(g, feats, cfg, &mut rng)
        }
        Method::SlidingWindow => sliding_window_extract(g, feats, cfg),
    })
}

/// Draws `cfg.samples_per_graph` start nodes uniformly (with replacement),
/// collects each node's BFS ball of radius `cfg.depth_limit`, and keeps the
/// induced subgraphs that meet the minimum node and edge counts.
pub fn bfs_extract<S: Scalar, R: Rng>(
    g: &Graph,
    feats: &FeatureMatrix<S>,
    cfg: &ExtractionConfig,
    rng: &mut R,
) -> Vec<Subgraph<S>> {
    if g.num_nodes == 0 {
        return Vec::new();
    }
    let adj = g.adjacency();
    let mut out = Vec::new();
    for _ in 0..cfg.samples_per_graph {
        let start = rng.random_range(0..g.num_nodes);
        let nodes = bfs_ball(&adj, start, cfg.depth_limit);
        let sub = induced(g, feats, &nodes);
        if keep(&sub, cfg) {
            out.push(sub);
        }
    }
    out
}

/// All nodes within `depth` hops of `start`, ascending.
pub fn bfs_ball(adj: &[Vec<usize>], start: usize, depth: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if dist[u] == depth {
            continue;
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (0..adj.len()).filter(|&v| dist[v] != usize::MAX).collect()
}

/// Slides a `cfg.window_size`-node window over the native node index order
/// in steps of `cfg.step_size`. The walk stops once a window reaches the
/// last node; a shorter tail window is kept only if it still meets the
/// minimum node count. A window larger than the graph degenerates to the
/// whole graph.
pub fn sliding_window_extract<S: Scalar>(
    g: &Graph,
    feats: &FeatureMatrix<S>,
    cfg: &ExtractionConfig,
) -> Vec<Subgraph<S>> {
    let n = g.num_nodes;
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + cfg.window_size).min(n);
        let nodes: Vec<usize> = (start..end).collect();
        let sub = induced(g, feats, &nodes);
        if keep(&sub, cfg) {
            out.push(sub);
        }
        if end == n {
            break;
        }
        start += cfg.step_size;
    }
    out
}

/// `round_half_up(fraction * mean_nodes)`, the window size used when a
/// sweep is specified as a fraction of the dataset's mean graph size.
pub fn window_size_from_fraction(ds: &Dataset, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "window fraction must be in (0, 1], got {fraction}"
        )));
    }
    Ok(((fraction * ds.mean_nodes + 0.5).floor() as usize).max(1))
}

/// Audit dump: `parent_id,label,node_map...`, one line per subgraph.
pub fn write_subgraph_dump<S: Scalar>(path: &Path, subs: &[Subgraph<S>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for sub in subs {
        let nodes: Vec<String> = sub.node_map.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{},{}", sub.parent_id, sub.label, nodes.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

fn keep<S: Scalar>(sub: &Subgraph<S>, cfg: &ExtractionConfig) -> bool {
    sub.num_nodes() >= cfg.min_nodes && sub.num_edge_pairs() >= cfg.min_edges
}

/// Induced subgraph on `nodes` (sorted, distinct), re-indexed to
/// `0..nodes.len()`.
fn induced<S: Scalar>(g: &Graph, feats: &FeatureMatrix<S>, nodes: &[usize]) -> Subgraph<S> {
    debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    let mut pos = vec![usize::MAX; g.num_nodes];
    for (new, &old) in nodes.iter().enumerate() {
        pos[old] = new;
    }
    let mut edges: Vec<(usize, usize)> = g
        .edges
        .iter()
        .filter(|&&(u, v)| pos[u] != usize::MAX && pos[v] != usize::MAX)
        .map(|&(u, v)| (pos[u], pos[v]))
        .collect();
    edges.sort_unstable();
    Subgraph {
        parent_id: g.id,
        node_map: nodes.to_vec(),
        edges,
        features: feats.select_rows(nodes),
        label: g.label,
    }
}
