//! Executes one training + evaluation run and writes its artifacts:
//! `manifest.toml`, `run.csv` (epoch logs), `result.csv`, `records.csv`
//! (per-graph evaluation), and `model.ckpt`.

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::Context;
use wsgat_core::extract::{extract_subgraphs, write_subgraph_dump, Subgraph};
use wsgat_core::graph::one_hot_features;
use wsgat_core::model::save_checkpoint;
use wsgat_core::train::{split_dataset, train, train_on_instances, EpochLog};
use wsgat_core::weaksup::{evaluate, evaluate_whole_graphs, Evaluation};

use crate::config::{Manifest, ResolvedRun, RunMode};
use crate::CliError;

pub struct RunOutput {
    pub accuracy: f64,
}

pub fn execute_run(rc: &ResolvedRun, quiet: bool) -> Result<RunOutput, CliError> {
    std::fs::create_dir_all(&rc.out_dir)
        .with_context(|| format!("creating {}", rc.out_dir.display()))
        .map_err(CliError::Runtime)?;
    Manifest::new(rc).write(&rc.out_dir.join("manifest.toml"))?;

    let run_csv = File::create(rc.out_dir.join("run.csv")).map_err(runtime)?;
    let mut run_csv = BufWriter::new(run_csv);
    writeln!(run_csv, "epoch,loss,acc").map_err(runtime)?;
    let mut log_epoch = |log: &EpochLog| {
        let line = format!(
            "{},{},{}",
            log.epoch, log.mean_train_loss, log.subgraph_train_accuracy
        );
        if !quiet {
            println!("{line}");
        }
        let _ = writeln!(run_csv, "{line}");
    };

    let (model, evaluation): (wsgat_core::GatModel, Evaluation<f64>) = match rc.mode {
        RunMode::Subgraph => {
            let outcome = train::<f64>(&rc.ds, &rc.ext, &rc.gat, &rc.tr, &mut log_epoch)
                .map_err(classify)?;
            if rc.dump_subgraphs {
                dump_train_subgraphs(rc)?;
            }
            let eval = evaluate(
                &outcome.model,
                &rc.ds,
                &outcome.test_ids,
                &rc.ext,
                &rc.gat,
                &rc.topk,
            )
            .map_err(classify)?;
            (outcome.model, eval)
        }
        RunMode::Baseline => {
            let (train_ids, test_ids) =
                split_dataset(&rc.ds, rc.tr.split_fraction, rc.tr.seed).map_err(classify)?;
            let instances: Vec<Subgraph<f64>> = train_ids
                .iter()
                .map(|&gid| {
                    let g = &rc.ds.graphs[gid];
                    let feats = one_hot_features(g, rc.ds.num_node_labels)?;
                    Ok(Subgraph::whole_graph(g, &feats))
                })
                .collect::<wsgat_core::Result<_>>()
                .map_err(classify)?;
            let (model, _) =
                train_on_instances(&instances, &rc.gat, &rc.tr, &mut log_epoch).map_err(classify)?;
            let eval =
                evaluate_whole_graphs(&model, &rc.ds, &test_ids, &rc.gat).map_err(classify)?;
            (model, eval)
        }
    };
    run_csv.flush().map_err(runtime)?;

    save_checkpoint(&model, &rc.gat, &rc.out_dir.join("model.ckpt")).map_err(classify)?;
    write_records(rc, &evaluation)?;

    let mut result = String::from("dataset,mode,accuracy\n");
    let mode = match rc.mode {
        RunMode::Subgraph => "subgraph",
        RunMode::Baseline => "baseline",
    };
    result.push_str(&format!("{},{},{}\n", rc.dataset_name, mode, evaluation.accuracy));
    std::fs::write(rc.out_dir.join("result.csv"), result).map_err(runtime)?;

    Ok(RunOutput {
        accuracy: evaluation.accuracy,
    })
}

fn write_records(rc: &ResolvedRun, evaluation: &Evaluation<f64>) -> Result<(), CliError> {
    let file = File::create(rc.out_dir.join("records.csv")).map_err(runtime)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "graph_id,true,pred,num_subgraphs,topk_scores").map_err(runtime)?;
    for r in &evaluation.records {
        let scores: Vec<String> = r.topk_scores.iter().map(|s| s.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{},{}",
            r.graph_id,
            r.true_label,
            r.predicted,
            r.num_subgraphs,
            scores.join(";")
        )
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    Ok(())
}

fn dump_train_subgraphs(rc: &ResolvedRun) -> Result<(), CliError> {
    let (train_ids, _) =
        split_dataset(&rc.ds, rc.tr.split_fraction, rc.tr.seed).map_err(classify)?;
    let mut subs: Vec<Subgraph<f64>> = Vec::new();
    for &gid in &train_ids {
        let g = &rc.ds.graphs[gid];
        let feats = one_hot_features(g, rc.ds.num_node_labels).map_err(classify)?;
        subs.extend(extract_subgraphs(g, &feats, &rc.ext).map_err(classify)?);
    }
    write_subgraph_dump(&rc.out_dir.join("subgraphs.txt"), &subs).map_err(classify)?;
    Ok(())
}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

/// Configuration-shaped core errors keep exit code 2; everything else is a
/// runtime failure.
pub fn classify(e: wsgat_core::Error) -> CliError {
    match e {
        wsgat_core::Error::Config(_) | wsgat_core::Error::Contract(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Runtime(other.into()),
    }
}
