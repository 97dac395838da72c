//! Exports the top-K attention-scored subgraphs of one graph as DOT files.

use std::path::{Path, PathBuf};

use wsgat_core::extract::extract_subgraphs;
use wsgat_core::graph::one_hot_features;
use wsgat_core::model::{forward_eval, load_checkpoint};
use wsgat_core::weaksup::{export_topk_dot, score_subgraph, select_top_k, SubgraphScore};

use crate::config::{FileConfig, Overrides};
use crate::runner::classify;
use crate::CliError;

pub fn execute_export(
    checkpoint: &Path,
    file: &FileConfig,
    over: &Overrides,
    graph_id: usize,
    out: PathBuf,
) -> Result<(), CliError> {
    let (model, gat) = load_checkpoint::<f64>(checkpoint).map_err(classify)?;
    let rc = crate::config::resolve(file, over, "runs/export")?;
    if rc.ds.num_node_labels != gat.in_dim || rc.ds.num_classes != gat.num_classes {
        return Err(CliError::Config(format!(
            "checkpoint was trained for in_dim={} num_classes={}, dataset {} has {} node labels and {} classes",
            gat.in_dim, gat.num_classes, rc.dataset_name, rc.ds.num_node_labels, rc.ds.num_classes
        )));
    }
    if graph_id >= rc.ds.graphs.len() {
        return Err(CliError::Config(format!(
            "graph id {graph_id} out of range; dataset {} has {} graphs",
            rc.dataset_name,
            rc.ds.graphs.len()
        )));
    }

    let g = &rc.ds.graphs[graph_id];
    let feats = one_hot_features::<f64>(g, rc.ds.num_node_labels).map_err(classify)?;
    let subs = extract_subgraphs(g, &feats, &rc.ext).map_err(classify)?;
    if subs.is_empty() {
        println!(
            "graph {graph_id}: extraction produced no subgraphs \
             (min_nodes={}, min_edges={}); nothing to export",
            rc.ext.min_nodes, rc.ext.min_edges
        );
        return Ok(());
    }

    let scores = subs
        .iter()
        .enumerate()
        .map(|(index, sub)| {
            let pass = forward_eval(&model, sub, &gat).map_err(classify)?;
            Ok(SubgraphScore {
                index,
                score: score_subgraph(&pass.attention),
                probs: pass.probs.clone(),
                logits: pass.tape.value(pass.logits).clone(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let selected = select_top_k(&scores, rc.topk.k).map_err(classify)?;
    let chosen: Vec<_> = selected.iter().map(|s| subs[s.index].clone()).collect();

    let files = export_topk_dot(g, &chosen, &out).map_err(classify)?;
    for (file, score) in files.iter().zip(
        selected
            .iter()
            .map(|s| s.score.to_string())
            .chain(std::iter::once("parent".into())),
    ) {
        println!("{} ({score})", file.display());
    }
    Ok(())
}
