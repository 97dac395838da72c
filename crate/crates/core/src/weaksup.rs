//! Inference over extracted subgraphs: score each one by how decisively its
//! attention concentrates, keep the top K, average their predictions, and
//! compare against the parent graph's label.
//!
//! Raw attention coefficients are degree-confounded (they sum to one over
//! each node's neighbors), so the score measures concentration above the
//! uniform baseline: the mean over destination nodes of
//! `max incoming alpha - 1 / in_degree`, taken from the final layer.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{extract_subgraphs, ExtractionConfig, Subgraph};
use crate::graph::{one_hot_features, Dataset, Graph};
use crate::matrix::Matrix;
use crate::model::{forward_eval, AttentionRecord, GatConfig, GatModel};
use crate::scalar::Scalar;
use crate::train::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Average the probability vectors of the selected subgraphs.
    MeanProbs,
    /// Average the raw logits, then softmax the mean.
    MeanLogitsSoftmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopKConfig {
    pub k: usize,
    pub aggregation: Aggregation,
}

impl Default for TopKConfig {
    fn default() -> Self {
        Self {
            k: 3,
            aggregation: Aggregation::MeanProbs,
        }
    }
}

impl TopKConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("top-k requires k >= 1".into()));
        }
        Ok(())
    }
}

/// One subgraph's inference products.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphScore<S> {
    /// Position within the parent graph's extraction list.
    pub index: usize,
    /// Attention concentration in `[0, 1)`.
    pub score: S,
    /// `(1, C)` class distribution.
    pub probs: Matrix<S>,
    /// `(1, C)` pre-softmax scores, kept for logit-space aggregation.
    pub logits: Matrix<S>,
}

/// Mean attention concentration above uniform, over the final layer's
/// destination nodes: `mean over dst of (max incoming alpha - 1/in_degree)`
/// where the in-degree counts the self-loop. Uniform attention scores 0;
/// an empty record scores 0.
pub fn score_subgraph<S: Scalar>(attn: &AttentionRecord<S>) -> S {
    let triples = attn.final_layer_triples();
    if triples.is_empty() {
        return S::zero();
    }
    let num_nodes = triples.iter().map(|&(d, _, _)| d).max().unwrap() + 1;
    let mut max_alpha = vec![S::neg_infinity(); num_nodes];
    let mut in_degree = vec![0usize; num_nodes];
    for &(dst, _, alpha) in triples {
        max_alpha[dst] = max_alpha[dst].max(alpha);
        in_degree[dst] += 1;
    }
    let mut total = S::zero();
    let mut counted = 0usize;
    for v in 0..num_nodes {
        if in_degree[v] == 0 {
            continue;
        }
        total += max_alpha[v] - S::one() / S::cast(in_degree[v] as f64);
        counted += 1;
    }
    if counted == 0 {
        S::zero()
    } else {
        total / S::cast(counted as f64)
    }
}

/// The `k` highest-scored entries; ties break toward the lower subgraph
/// index. Everything is returned when `k` exceeds the list length.
pub fn select_top_k<S: Scalar>(
    scores: &[SubgraphScore<S>],
    k: usize,
) -> Result<Vec<SubgraphScore<S>>> {
    if scores.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .score
            .partial_cmp(&scores[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(scores[a].index.cmp(&scores[b].index))
    });
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| scores[i].clone())
        .collect())
}

/// Averages the selected subgraphs' predictions into one distribution and
/// takes its argmax; ties go to the lower class id.
pub fn aggregate_predictions<S: Scalar>(
    selected: &[SubgraphScore<S>],
    aggregation: Aggregation,
) -> Result<(Matrix<S>, usize)> {
    if selected.is_empty() {
        return Err(Error::Contract(
            "aggregate_predictions over an empty selection".into(),
        ));
    }
    let classes = selected[0].probs.cols();
    let inv = S::one() / S::cast(selected.len() as f64);
    let mean_of = |pick: fn(&SubgraphScore<S>) -> &Matrix<S>| -> Result<Matrix<S>> {
        let mut mean = Matrix::zeros(1, classes);
        for s in selected {
            mean.add_scaled_assign(pick(s), inv)?;
        }
        Ok(mean)
    };
    let probs = match aggregation {
        Aggregation::MeanProbs => mean_of(|s| &s.probs)?,
        Aggregation::MeanLogitsSoftmax => {
            let mean_logits = mean_of(|s| &s.logits)?;
            softmax_row(&mean_logits)
        }
    };
    let predicted = argmax(probs.row(0));
    Ok((probs, predicted))
}

fn softmax_row<S: Scalar>(logits: &Matrix<S>) -> Matrix<S> {
    let row = logits.row(0);
    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = row.iter().map(|&v| (v - m).exp()).collect();
    let total: S = exps.iter().copied().sum();
    Matrix::from_vec(1, logits.cols(), exps.into_iter().map(|e| e / total).collect())
        .expect("same length")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEvalRecord<S> {
    pub graph_id: usize,
    pub true_label: usize,
    pub predicted: usize,
    /// Subgraphs the extraction produced; zero means the whole-graph
    /// fallback decided this graph.
    pub num_subgraphs: usize,
    /// Scores of the selected top-K, highest first.
    pub topk_scores: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct Evaluation<S> {
    pub accuracy: f64,
    pub records: Vec<GraphEvalRecord<S>>,
}

/// Graph-level evaluation: extract with the training-time configuration,
/// score every subgraph in eval mode, aggregate the top K, and compare the
/// argmax with the true label. Extraction that yields nothing falls back
/// to a single whole-graph pass.
pub fn evaluate<S: Scalar>(
    model: &GatModel<S>,
    ds: &Dataset,
    test_ids: &[usize],
    ext: &ExtractionConfig,
    gat: &GatConfig,
    topk: &TopKConfig,
) -> Result<Evaluation<S>> {
    let scorer = |sub: &Subgraph<S>| -> Result<(Matrix<S>, Matrix<S>, S)> {
        let pass = forward_eval(model, sub, gat)?;
        let score = score_subgraph(&pass.attention);
        let logits = pass.tape.value(pass.logits).clone();
        Ok((pass.probs, logits, score))
    };
    evaluate_with(ds, test_ids, ext, topk, &scorer)
}

/// Evaluation with an injected per-subgraph scorer; the production path
/// wraps the model, tests substitute stubs.
pub fn evaluate_with<S, F>(
    ds: &Dataset,
    test_ids: &[usize],
    ext: &ExtractionConfig,
    topk: &TopKConfig,
    scorer: &F,
) -> Result<Evaluation<S>>
where
    S: Scalar,
    F: Fn(&Subgraph<S>) -> Result<(Matrix<S>, Matrix<S>, S)> + Sync,
{
    if test_ids.is_empty() {
        return Err(Error::Contract("evaluate needs at least one test id".into()));
    }
    topk.validate()?;
    let records: Vec<GraphEvalRecord<S>> = test_ids
        .par_iter()
        .map(|&gid| -> Result<GraphEvalRecord<S>> {
            let g = &ds.graphs[gid];
            let feats = one_hot_features(g, ds.num_node_labels)?;
            let subs = extract_subgraphs(g, &feats, ext)?;
            if subs.is_empty() {
                let whole = Subgraph::whole_graph(g, &feats);
                let (probs, _, _) = scorer(&whole)?;
                return Ok(GraphEvalRecord {
                    graph_id: gid,
                    true_label: g.label,
                    predicted: argmax(probs.row(0)),
                    num_subgraphs: 0,
                    topk_scores: Vec::new(),
                });
            }
            let scores = subs
                .iter()
                .enumerate()
                .map(|(index, sub)| {
                    let (probs, logits, score) = scorer(sub)?;
                    Ok(SubgraphScore {
                        index,
                        score,
                        probs,
                        logits,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let selected = select_top_k(&scores, topk.k)?;
            let (_, predicted) = aggregate_predictions(&selected, topk.aggregation)?;
            Ok(GraphEvalRecord {
                graph_id: gid,
                true_label: g.label,
                predicted,
                num_subgraphs: subs.len(),
                topk_scores: selected.iter().map(|s| s.score).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let correct = records.iter().filter(|r| r.predicted == r.true_label).count();
    Ok(Evaluation {
        accuracy: correct as f64 / records.len() as f64,
        records,
    })
}

/// Whole-graph evaluation for the no-extraction baseline: one forward pass
/// per graph, no subgraph machinery.
pub fn evaluate_whole_graphs<S: Scalar>(
    model: &GatModel<S>,
    ds: &Dataset,
    test_ids: &[usize],
    gat: &GatConfig,
) -> Result<Evaluation<S>> {
    if test_ids.is_empty() {
        return Err(Error::Contract("evaluate needs at least one test id".into()));
    }
    let records: Vec<GraphEvalRecord<S>> = test_ids
        .par_iter()
        .map(|&gid| -> Result<GraphEvalRecord<S>> {
            let g = &ds.graphs[gid];
            let feats = one_hot_features(g, ds.num_node_labels)?;
            let whole = Subgraph::whole_graph(g, &feats);
            let pass = forward_eval(model, &whole, gat)?;
            Ok(GraphEvalRecord {
                graph_id: gid,
                true_label: g.label,
                predicted: argmax(pass.probs.row(0)),
                num_subgraphs: 1,
                topk_scores: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = records.iter().filter(|r| r.predicted == r.true_label).count();
    Ok(Evaluation {
        accuracy: correct as f64 / records.len() as f64,
        records,
    })
}

/// Writes one DOT file per selected subgraph (node ids are original parent
/// indices) plus one for the parent graph with the selected nodes styled.
/// Returns the created paths; an empty selection creates nothing.
pub fn export_topk_dot<S: Scalar>(
    g: &Graph,
    selected: &[Subgraph<S>],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if selected.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    for (rank, sub) in selected.iter().enumerate() {
        let path = dir.join(format!("graph_{}_top{}.dot", g.id, rank + 1));
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "graph graph_{}_top{} {{", g.id, rank + 1)?;
        for &orig in &sub.node_map {
            writeln!(w, "  {orig};")?;
        }
        for &(u, v) in &sub.edges {
            if u < v {
                writeln!(w, "  {} -- {};", sub.node_map[u], sub.node_map[v])?;
            }
        }
        writeln!(w, "}}")?;
        w.flush()?;
        written.push(path);
    }

    let highlighted: std::collections::BTreeSet<usize> = selected
        .iter()
        .flat_map(|s| s.node_map.iter().copied())
        .collect();
    let path = dir.join(format!("graph_{}.dot", g.id));
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "graph graph_{} {{", g.id)?;
    for v in 0..g.num_nodes {
        if highlighted.contains(&v) {
            writeln!(w, "  {v} [style=filled, fillcolor=lightblue];")?;
        } else {
            writeln!(w, "  {v};")?;
        }
    }
    for &(u, v) in &g.edges {
        if u < v {
            writeln!(w, "  {u} -- {v};")?;
        }
    }
    writeln!(w, "}}")?;
    w.flush()?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerAttention;
    use crate::synthetic;
    use std::collections::BTreeSet;

    fn record_from(triples: Vec<(usize, usize, f64)>) -> AttentionRecord<f64> {
        AttentionRecord {
            layers: vec![LayerAttention {
                heads: vec![triples],
                isolated: vec![],
            }],
        }
    }

    fn score_entry(index: usize, score: f64) -> SubgraphScore<f64> {
        SubgraphScore {
            index,
            score,
            probs: Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            logits: Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap(),
        }
    }

    #[test]
    fn uniform_attention_scores_zero() {
        // Two incoming edges per node, each alpha exactly 1/2.
        let record = record_from(vec![
            (0, 0, 0.5),
            (0, 1, 0.5),
            (1, 0, 0.5),
            (1, 1, 0.5),
        ]);
        assert_eq!(score_subgraph(&record), 0.0);
    }

    #[test]
    fn fully_concentrated_degree_two_scores_half() {
        let record = record_from(vec![
            (0, 1, 1.0),
            (0, 0, 0.0),
            (1, 0, 1.0),
            (1, 1, 0.0),
        ]);
        assert!((score_subgraph(&record) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_record_scores_zero() {
        let record = record_from(vec![]);
        assert_eq!(score_subgraph(&record), 0.0);
    }

    #[test]
    fn score_matches_recomputation_from_raw_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let nodes = rng.random_range(2..7);
            let mut triples = Vec::new();
            for dst in 0..nodes {
                let deg = rng.random_range(1..5);
                let raw: Vec<f64> = (0..deg).map(|_| rng.random_range(0.01..1.0)).collect();
                let total: f64 = raw.iter().sum();
                for (src, r) in raw.iter().enumerate() {
                    triples.push((dst, src, r / total));
                }
            }
            // Naive recomputation straight off the triples.
            let mut expected = 0.0;
            for dst in 0..nodes {
                let incoming: Vec<f64> = triples
                    .iter()
                    .filter(|t| t.0 == dst)
                    .map(|t| t.2)
                    .collect();
                let max = incoming.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                expected += max - 1.0 / incoming.len() as f64;
            }
            expected /= nodes as f64;
            let got = score_subgraph(&record_from(triples));
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn top_k_takes_everything_when_k_exceeds_count() {
        let scores = vec![score_entry(0, 0.2), score_entry(1, 0.4)];
        let selected = select_top_k(&scores, 3).unwrap();
        assert_eq!(selected.len(), 2);
        assert_eq!(selected[0].index, 1);
    }

    #[test]
    fn top_k_ties_break_to_lower_index() {
        let scores = vec![score_entry(0, 0.3), score_entry(1, 0.1), score_entry(2, 0.3)];
        let selected = select_top_k(&scores, 1).unwrap();
        assert_eq!(selected[0].index, 0);
    }

    #[test]
    fn top_k_on_duplicated_inputs_is_deterministic() {
        let scores: Vec<SubgraphScore<f64>> = (0..6).map(|i| score_entry(i, 0.5)).collect();
        let selected = select_top_k(&scores, 3).unwrap();
        let picked: Vec<usize> = selected.iter().map(|s| s.index).collect();
        assert_eq!(picked, vec![0, 1, 2]);
    }

    #[test]
    fn top_k_matches_full_sort_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let scores: Vec<SubgraphScore<f64>> = (0..100)
            .map(|i| score_entry(i, rng.random_range(0.0..1.0)))
            .collect();
        let selected = select_top_k(&scores, 10).unwrap();

        // Oracle: repeated max extraction.
        let mut remaining: Vec<(f64, usize)> =
            scores.iter().map(|s| (s.score, s.index)).collect();
        let mut expected = Vec::new();
        for _ in 0..10 {
            let best = remaining
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    a.0.partial_cmp(&b.0).unwrap().then(b.1.cmp(&a.1))
                })
                .map(|(pos, _)| pos)
                .unwrap();
            expected.push(remaining.remove(best).1);
        }
        let picked: Vec<usize> = selected.iter().map(|s| s.index).collect();
        assert_eq!(picked, expected);

        // Subset property: every excluded score <= every included score.
        let included_min = selected
            .iter()
            .map(|s| s.score)
            .fold(f64::INFINITY, f64::min);
        for s in &scores {
            if !picked.contains(&s.index) {
                assert!(s.score <= included_min);
            }
        }
    }

    #[test]
    fn empty_selection_is_an_error() {
        let empty: Vec<SubgraphScore<f64>> = vec![];
        assert!(matches!(
            select_top_k(&empty, 3),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn aggregation_of_identical_distributions_is_identity() {
        let mut a = score_entry(0, 0.5);
        let mut b = score_entry(1, 0.2);
        let dist = vec![0.7, 0.3];
        a.probs = Matrix::from_rows(&[dist.clone()]).unwrap();
        b.probs = Matrix::from_rows(&[dist.clone()]).unwrap();
        let (probs, predicted) =
            aggregate_predictions(&[a, b], Aggregation::MeanProbs).unwrap();
        assert_eq!(probs.row(0), dist.as_slice());
        assert_eq!(predicted, 0);
    }

    #[test]
    fn opposite_certainties_average_to_tie_broken_low() {
        let mut a = score_entry(0, 0.5);
        let mut b = score_entry(1, 0.5);
        a.probs = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        b.probs = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let (probs, predicted) =
            aggregate_predictions(&[a, b], Aggregation::MeanProbs).unwrap();
        assert_eq!(probs.row(0), &[0.5, 0.5]);
        assert_eq!(predicted, 0);
    }

    #[test]
    fn logit_space_aggregation_softmaxes_the_mean() {
        let mut a = score_entry(0, 0.5);
        let mut b = score_entry(1, 0.5);
        a.logits = Matrix::from_rows(&[vec![2.0, 0.0]]).unwrap();
        b.logits = Matrix::from_rows(&[vec![0.0, 2.0]]).unwrap();
        let (probs, predicted) =
            aggregate_predictions(&[a, b], Aggregation::MeanLogitsSoftmax).unwrap();
        // Mean logits are (1, 1); softmax of a constant row is uniform.
        assert!((probs[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((probs[(0, 1)] - 0.5).abs() < 1e-12);
        assert_eq!(predicted, 0);
    }

    #[test]
    fn aggregation_matches_elementwise_sum_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.random_range(1..6);
            let entries: Vec<SubgraphScore<f64>> = (0..n)
                .map(|i| {
                    let mut e = score_entry(i, 0.1);
                    let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..1.0)).collect();
                    let t: f64 = raw.iter().sum();
                    e.probs =
                        Matrix::from_rows(&[raw.iter().map(|v| v / t).collect()]).unwrap();
                    e
                })
                .collect();
            let (probs, _) = aggregate_predictions(&entries, Aggregation::MeanProbs).unwrap();
            for j in 0..3 {
                let expected: f64 =
                    entries.iter().map(|e| e.probs[(0, j)]).sum::<f64>() / n as f64;
                assert!((probs[(0, j)] - expected).abs() < 1e-12);
            }
            let total: f64 = probs.data().iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    fn stub_ext() -> ExtractionConfig {
        ExtractionConfig {
            min_nodes: 2,
            min_edges: 1,
            ..ExtractionConfig::sliding(5)
        }
    }

    #[test]
    fn perfect_stub_scores_full_accuracy() {
        let ds = synthetic::two_class_dataset(8, 10, 1);
        let ids: Vec<usize> = (0..8).collect();
        let scorer = |sub: &Subgraph<f64>| {
            let mut probs = Matrix::zeros(1, 2);
            probs[(0, sub.label)] = 1.0;
            Ok((probs.clone(), probs, 0.5))
        };
        let eval = evaluate_with(&ds, &ids, &stub_ext(), &TopKConfig::default(), &scorer).unwrap();
        assert_eq!(eval.accuracy, 1.0);
    }

    #[test]
    fn constant_class_stub_scores_class_frequency() {
        let ds = synthetic::two_class_dataset(10, 10, 2);
        let ids: Vec<usize> = (0..10).collect();
        let scorer = |_: &Subgraph<f64>| {
            let probs = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
            Ok((probs.clone(), probs, 0.1))
        };
        let eval = evaluate_with(&ds, &ids, &stub_ext(), &TopKConfig::default(), &scorer).unwrap();
        let class0 = ds.graphs.iter().filter(|g| g.label == 0).count();
        assert!((eval.accuracy - class0 as f64 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn impossible_extraction_falls_back_to_whole_graph() {
        let ds = synthetic::two_class_dataset(4, 8, 3);
        let ids: Vec<usize> = (0..4).collect();
        let ext = ExtractionConfig {
            min_nodes: 10_000,
            ..ExtractionConfig::sliding(5)
        };
        let scorer = |sub: &Subgraph<f64>| {
            let mut probs = Matrix::zeros(1, 2);
            probs[(0, sub.label)] = 1.0;
            Ok((probs.clone(), probs, 0.5))
        };
        let eval = evaluate_with(&ds, &ids, &ext, &TopKConfig::default(), &scorer).unwrap();
        assert_eq!(eval.accuracy, 1.0);
        for r in &eval.records {
            assert_eq!(r.num_subgraphs, 0);
            assert!(r.topk_scores.is_empty());
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        use crate::model::init_params;
        let ds = synthetic::two_class_dataset(6, 10, 4);
        let ids: Vec<usize> = (0..6).collect();
        let gat = GatConfig {
            hidden_dim: 3,
            num_heads: 2,
            out_hidden: 4,
            ..GatConfig::new(ds.num_node_labels, ds.num_classes)
        };
        let model: GatModel<f64> = init_params(&gat, 9).unwrap();
        let a = evaluate(&model, &ds, &ids, &stub_ext(), &gat, &TopKConfig::default()).unwrap();
        let b = evaluate(&model, &ds, &ids, &stub_ext(), &gat, &TopKConfig::default()).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.records, b.records);
    }

    /// Minimal DOT reader for round-trip checks: node ids and undirected
    /// edge pairs.
    fn parse_dot(text: &str) -> (BTreeSet<usize>, BTreeSet<(usize, usize)>) {
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for line in text.lines() {
            let line = line.trim().trim_end_matches(';');
            if line.is_empty() || line.starts_with("graph") || line == "}" {
                continue;
            }
            if let Some((a, b)) = line.split_once("--") {
                let u: usize = a.trim().parse().unwrap();
                let v: usize = b.trim().parse().unwrap();
                edges.insert((u.min(v), u.max(v)));
                nodes.insert(u);
                nodes.insert(v);
            } else {
                let id = line.split_whitespace().next().unwrap();
                nodes.insert(id.parse().unwrap());
            }
        }
        (nodes, edges)
    }

    #[test]
    fn dot_export_emits_one_file_per_subgraph_plus_parent() {
        let ds = synthetic::two_class_dataset(1, 12, 5);
        let g = &ds.graphs[0];
        let feats = one_hot_features::<f64>(g, ds.num_node_labels).unwrap();
        let subs = extract_subgraphs(g, &feats, &stub_ext()).unwrap();
        assert!(subs.len() >= 3, "need at least 3 windows for this test");
        let selected = subs[..3].to_vec();
        let dir = tempfile::tempdir().unwrap();
        let files = export_topk_dot(g, &selected, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        for f in &files {
            assert!(f.exists());
        }
    }

    #[test]
    fn dot_roundtrip_recovers_node_and_edge_sets() {
        let ds = synthetic::two_class_dataset(1, 10, 6);
        let g = &ds.graphs[0];
        let feats = one_hot_features::<f64>(g, ds.num_node_labels).unwrap();
        let subs = extract_subgraphs(g, &feats, &stub_ext()).unwrap();
        let selected = vec![subs[0].clone()];
        let dir = tempfile::tempdir().unwrap();
        let files = export_topk_dot(g, &selected, dir.path()).unwrap();

        let text = std::fs::read_to_string(&files[0]).unwrap();
        let (nodes, edges) = parse_dot(&text);
        let expected_nodes: BTreeSet<usize> = subs[0].node_map.iter().copied().collect();
        let expected_edges: BTreeSet<(usize, usize)> = subs[0]
            .edges
            .iter()
            .filter(|&&(u, v)| u < v)
            .map(|&(u, v)| (subs[0].node_map[u], subs[0].node_map[v]))
            .collect();
        assert_eq!(nodes, expected_nodes);
        assert_eq!(edges, expected_edges);

        // Parent file covers the whole graph.
        let parent_text = std::fs::read_to_string(files.last().unwrap()).unwrap();
        let (pnodes, pedges) = parse_dot(&parent_text);
        assert_eq!(pnodes.len(), g.num_nodes);
        assert_eq!(pedges.len(), g.num_edge_pairs());
    }

    #[test]
    fn empty_selection_writes_nothing() {
        let ds = synthetic::two_class_dataset(1, 8, 7);
        let g = &ds.graphs[0];
        let dir = tempfile::tempdir().unwrap();
        let files = export_topk_dot::<f64>(g, &[], dir.path()).unwrap();
        assert!(files.is_empty());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
