//! Parser and writer for the TU Dortmund benchmark text format.
//!
//! A dataset `NAME` in directory `dir` consists of four line-oriented files:
//!
//! * `NAME_A.txt` — one directed edge per line, `i, j`, 1-based global ids
//! * `NAME_graph_indicator.txt` — graph id (1-based) of node on line `n`
//! * `NAME_graph_labels.txt` — class label of graph on line `g`
//! * `NAME_node_labels.txt` — categorical label of node on line `n`
//!
//! Whitespace around commas is tolerated. Optional files of the format
//! (`_node_attributes.txt`, `_edge_labels.txt`, ...) are ignored. Raw label
//! values are remapped to dense ids in ascending raw order; node and graph
//! indices become 0-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph};

/// Counters for tolerated irregularities in the input files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseStats {
    /// Directed pairs listed more than once.
    pub duplicate_edges: usize,
    /// Pairs present in one direction only; the reverse was added.
    pub symmetrized_edges: usize,
    /// `(v, v)` lines dropped.
    pub self_loops_dropped: usize,
}

pub fn parse_tu_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    parse_tu_dataset_stats(dir, name).map(|(ds, _)| ds)
}

pub fn parse_tu_dataset_stats(dir: &Path, name: &str) -> Result<(Dataset, ParseStats)> {
    let indicator = read_int_lines(&dir.join(format!("{name}_graph_indicator.txt")))?;
    let graph_labels_raw = read_int_lines(&dir.join(format!("{name}_graph_labels.txt")))?;
    let node_labels_raw = read_int_lines(&dir.join(format!("{name}_node_labels.txt")))?;
    let a_path = dir.join(format!("{name}_A.txt"));

    let num_nodes = indicator.len();
    let num_graphs = graph_labels_raw.len();
    if node_labels_raw.len() != num_nodes {
        return Err(Error::Format {
            file: format!("{name}_node_labels.txt"),
            line: node_labels_raw.len().min(num_nodes) + 1,
            message: format!(
                "{} node labels for {} nodes in the graph indicator",
                node_labels_raw.len(),
                num_nodes
            ),
        });
    }

    // Global node id (0-based) -> (graph index, local node index).
    let indicator_file = format!("{name}_graph_indicator.txt");
    let mut node_graph = Vec::with_capacity(num_nodes);
    let mut node_local = Vec::with_capacity(num_nodes);
    let mut graph_sizes = vec![0usize; num_graphs];
    for &(raw, line) in &indicator {
        if raw < 1 || raw > num_graphs as i64 {
            return Err(Error::Format {
                file: indicator_file.clone(),
                line,
                message: format!("graph id {raw} outside [1, {num_graphs}]"),
            });
        }
        let g = (raw - 1) as usize;
        node_graph.push(g);
        node_local.push(graph_sizes[g]);
        graph_sizes[g] += 1;
    }

    // Directed pairs per graph, in local indices, deduplicated as we read.
    let mut stats = ParseStats::default();
    let mut edge_sets: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); num_graphs];
    let a_file = format!("{name}_A.txt");
    for (line_no, fields) in read_csv_lines(&a_path)? {
        if fields.len() != 2 {
            return Err(Error::Format {
                file: a_file.clone(),
                line: line_no,
                message: format!("expected `i, j`, found {} fields", fields.len()),
            });
        }
        let u = parse_int(&fields[0], &a_file, line_no)?;
        let v = parse_int(&fields[1], &a_file, line_no)?;
        let check = |x: i64| -> Result<usize> {
            if x < 1 || x > num_nodes as i64 {
                return Err(Error::Format {
                    file: a_file.clone(),
                    line: line_no,
                    message: format!("node id {x} outside [1, {num_nodes}]"),
                });
            }
            Ok((x - 1) as usize)
        };
        let (u, v) = (check(u)?, check(v)?);
        if node_graph[u] != node_graph[v] {
            return Err(Error::Format {
                file: a_file.clone(),
                line: line_no,
                message: format!(
                    "edge ({}, {}) crosses graphs {} and {}",
                    u + 1,
                    v + 1,
                    node_graph[u] + 1,
                    node_graph[v] + 1
                ),
            });
        }
        if u == v {
            stats.self_loops_dropped += 1;
            continue;
        }
        let inserted = edge_sets[node_graph[u]].insert((node_local[u], node_local[v]));
        if !inserted {
            stats.duplicate_edges += 1;
        }
    }

    for set in &mut edge_sets {
        let missing: Vec<(usize, usize)> = set
            .iter()
            .filter(|&&(a, b)| !set.contains(&(b, a)))
            .map(|&(a, b)| (b, a))
            .collect();
        stats.symmetrized_edges += missing.len();
        set.extend(missing);
    }

    let graph_label_map = dense_map(graph_labels_raw.iter().map(|&(v, _)| v));
    let node_label_map = dense_map(node_labels_raw.iter().map(|&(v, _)| v));

    let mut per_graph_node_labels: Vec<Vec<usize>> =
        graph_sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
    for (idx, &(raw, _)) in node_labels_raw.iter().enumerate() {
        per_graph_node_labels[node_graph[idx]].push(node_label_map[&raw]);
    }

    let mut graphs = Vec::with_capacity(num_graphs);
    for g in 0..num_graphs {
        let undirected: Vec<(usize, usize)> = edge_sets[g]
            .iter()
            .filter(|&&(a, b)| a < b)
            .copied()
            .collect();
        graphs.push(Graph::new(
            g,
            graph_sizes[g],
            &undirected,
            std::mem::take(&mut per_graph_node_labels[g]),
            graph_label_map[&graph_labels_raw[g].0],
        )?);
    }

    let ds = Dataset::new(name, graphs)?;
    debug_assert_eq!(ds.num_classes, graph_label_map.len());
    Ok((ds, stats))
}

/// Serializes a dataset back to the four-file format with canonical (sorted)
/// edge ordering and dense labels. Re-parsing yields an identical dataset.
pub fn write_tu_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let name = &ds.name;

    let mut a = BufWriter::new(File::create(dir.join(format!("{name}_A.txt")))?);
    let mut indicator = BufWriter::new(File::create(
        dir.join(format!("{name}_graph_indicator.txt")),
    )?);
    let mut graph_labels =
        BufWriter::new(File::create(dir.join(format!("{name}_graph_labels.txt")))?);
    let mut node_labels =
        BufWriter::new(File::create(dir.join(format!("{name}_node_labels.txt")))?);

    let mut base = 0usize; // global id of each graph's first node
    for g in &ds.graphs {
        for &(u, v) in &g.edges {
            writeln!(a, "{}, {}", base + u + 1, base + v + 1)?;
        }
        for _ in 0..g.num_nodes {
            writeln!(indicator, "{}", g.id + 1)?;
        }
        writeln!(graph_labels, "{}", g.label)?;
        for &lab in &g.node_labels {
            writeln!(node_labels, "{lab}")?;
        }
        base += g.num_nodes;
    }
    a.flush()?;
    indicator.flush()?;
    graph_labels.flush()?;
    node_labels.flush()?;
    Ok(())
}

/// Raw value -> dense id, dense ids assigned in ascending raw order.
fn dense_map(values: impl Iterator<Item = i64>) -> BTreeMap<i64, usize> {
    let distinct: BTreeSet<i64> = values.collect();
    distinct.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| Error::Ingestion {
        path: PathBuf::from(path),
        source,
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// One integer per non-empty line, with its 1-based line number.
fn read_int_lines(path: &Path) -> Result<Vec<(i64, usize)>> {
    let fname = file_name(path);
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        out.push((parse_int(trimmed, &fname, i + 1)?, i + 1));
    }
    Ok(out)
}

/// Comma-separated fields per non-empty line, with 1-based line numbers.
fn read_csv_lines(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        out.push((
            i + 1,
            trimmed.split(',').map(|f| f.trim().to_string()).collect(),
        ));
    }
    Ok(out)
}

fn parse_int(token: &str, file: &str, line: usize) -> Result<i64> {
    token.trim().parse().map_err(|_| Error::Format {
        file: file.to_string(),
        line,
        message: format!("expected an integer, found {token:?}"),
    })
}
