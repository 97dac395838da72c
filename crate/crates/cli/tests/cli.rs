//! End-to-end tests of the `wsgat` binary over a small on-disk corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wsgat_core::synthetic::two_class_dataset;
use wsgat_core::tudataset::write_tu_dataset;

fn wsgat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wsgat"))
}

/// Writes a toy corpus named TOY under `<dir>/TOY/`.
fn toy_corpus(dir: &Path, graphs: usize, nodes: usize) -> PathBuf {
    let mut ds = two_class_dataset(graphs, nodes, 42);
    ds.name = "TOY".into();
    let data_dir = dir.join("TOY");
    write_tu_dataset(&ds, &data_dir).unwrap();
    data_dir
}

fn toy_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.toml");
    let text = format!(
        r#"
[dataset]
name = "TOY"

[extraction]
method = "sliding_window"
window_size = 6
step_size = 3
min_nodes = 3
min_edges = 2

[model]
hidden_dim = 4
num_heads = 2
out_hidden = 8

[train]
epochs = 8

{extra}
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn run_produces_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 10, 12);
    let config = toy_config(tmp.path(), "");
    let out_dir = tmp.path().join("out");

    let output = run_ok(
        wsgat()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .arg("--seed")
            .arg("3")
            .env("WSGAT_DATA_DIR", tmp.path()),
    );

    for artifact in ["manifest.toml", "run.csv", "result.csv", "records.csv", "model.ckpt"] {
        assert!(out_dir.join(artifact).exists(), "missing {artifact}");
    }
    // Epoch lines stream to stdout as `epoch,loss,acc`.
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("1,")), "stdout: {stdout}");

    let run_csv = std::fs::read_to_string(out_dir.join("run.csv")).unwrap();
    assert!(run_csv.starts_with("epoch,loss,acc\n"));
    assert_eq!(run_csv.lines().count(), 9); // header + 8 epochs

    let records = std::fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert!(records.starts_with("graph_id,true,pred,num_subgraphs,topk_scores\n"));
    assert_eq!(records.lines().count(), 3); // header + 2 test graphs
}

#[test]
fn invalid_dropout_exits_2_and_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 6, 10);
    let config = toy_config(tmp.path(), "[model.extra]\n");
    // Rewrite with a bad dropout rate.
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("[model]", "[model]\ndropout_p = 1.5")
        .replace("[model.extra]\n", "");
    std::fs::write(&config, text).unwrap();

    let out = wsgat()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .env("WSGAT_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("dropout_p"), "stderr: {stderr}");
}

#[test]
fn missing_dataset_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = toy_config(tmp.path(), "");
    let out = wsgat()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .env("WSGAT_DATA_DIR", tmp.path().join("nowhere"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("TOY"), "stderr: {stderr}");
}

#[test]
fn reruns_with_same_seed_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 12);
    let config = toy_config(tmp.path(), "");

    let mut artifacts = Vec::new();
    for name in ["a", "b"] {
        let out_dir = tmp.path().join(name);
        run_ok(
            wsgat()
                .arg("run")
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out_dir)
                .arg("--seed")
                .arg("17")
                .env("WSGAT_DATA_DIR", tmp.path()),
        );
        artifacts.push((
            std::fs::read(out_dir.join("result.csv")).unwrap(),
            std::fs::read(out_dir.join("model.ckpt")).unwrap(),
            std::fs::read(out_dir.join("run.csv")).unwrap(),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "result.csv differs");
    assert_eq!(artifacts[0].1, artifacts[1].1, "model.ckpt differs");
    assert_eq!(artifacts[0].2, artifacts[1].2, "run.csv differs");
}

#[test]
fn baseline_runs_on_toy_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 10);
    let config = toy_config(tmp.path(), "");
    let out_dir = tmp.path().join("base");
    let output = run_ok(
        wsgat()
            .arg("baseline")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    let acc_line = stdout.lines().last().unwrap();
    assert!(acc_line.starts_with("accuracy "));
    let acc: f64 = acc_line.trim_start_matches("accuracy ").parse().unwrap();
    assert!(acc.is_finite());
    let result = std::fs::read_to_string(out_dir.join("result.csv")).unwrap();
    assert!(result.contains("baseline"));
}

#[test]
fn sweep_emits_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 12);
    let config = toy_config(
        tmp.path(),
        "[sweep]\nvariable = \"window_fraction\"\nvalues = [0.3, 0.5, 0.8]\nrepeats = 2\n",
    );
    let out_dir = tmp.path().join("sweep");
    run_ok(
        wsgat()
            .arg("sweep")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );

    let table = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "value,nodes_or_depth,accuracy_mean,accuracy_std");
    assert_eq!(lines.len(), 4); // header + 3 values
    for line in &lines[1..] {
        let std: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(std >= 0.0);
    }

    let plot = std::fs::read_to_string(out_dir.join("sweep_plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 7); // header + 3 values x 2 repeats

    // Every point ran in an isolated directory with its own artifacts.
    assert!(out_dir.join("point_0.3/rep_0/result.csv").exists());
    assert!(out_dir.join("point_0.8/rep_1/model.ckpt").exists());
}

#[test]
fn parallel_sweep_matches_sequential() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 12);
    let config = toy_config(
        tmp.path(),
        "[sweep]\nvariable = \"window_fraction\"\nvalues = [0.4, 0.6, 0.9]\nrepeats = 1\n",
    );
    let mut tables = Vec::new();
    for (name, parallel) in [("seq", "1"), ("par", "3")] {
        let out_dir = tmp.path().join(name);
        run_ok(
            wsgat()
                .arg("sweep")
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out_dir)
                .arg("--parallel")
                .arg(parallel)
                .env("WSGAT_DATA_DIR", tmp.path()),
        );
        tables.push(std::fs::read(out_dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1], "parallel sweep changed the results");
}

#[test]
fn subgraph_dump_is_written_when_enabled() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 12);
    let config = toy_config(tmp.path(), "");
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("min_edges = 2", "min_edges = 2\ndump_subgraphs = true");
    std::fs::write(&config, text).unwrap();
    let out_dir = tmp.path().join("out");
    run_ok(
        wsgat()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    let dump = std::fs::read_to_string(out_dir.join("subgraphs.txt")).unwrap();
    // Lines of `parent_id,label,node_map...`.
    let first = dump.lines().next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 3, "line: {first}");
    assert!(fields[2].split(' ').all(|v| v.parse::<usize>().is_ok()));
}

#[test]
fn depth_sweep_uses_bfs() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 12);
    let config = toy_config(
        tmp.path(),
        "[sweep]\nvariable = \"depth_limit\"\nvalues = [1, 2]\nrepeats = 1\n",
    );
    let out_dir = tmp.path().join("sweep");
    run_ok(
        wsgat()
            .arg("sweep")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    let manifest =
        std::fs::read_to_string(out_dir.join("point_1/rep_0/manifest.toml")).unwrap();
    assert!(manifest.contains("bfs"), "manifest: {manifest}");
    let table = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn failing_sweep_point_becomes_nan_row_and_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 12);
    // min_nodes is impossible, so every point fails at train time.
    let config = toy_config(
        tmp.path(),
        "[sweep]\nvariable = \"window_fraction\"\nvalues = [0.5]\nrepeats = 1\n",
    );
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("min_nodes = 3", "min_nodes = 100000");
    std::fs::write(&config, text).unwrap();

    let out_dir = tmp.path().join("sweep");
    let out = wsgat()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .env("WSGAT_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let table = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(table.contains("NaN"), "table: {table}");
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn export_topk_writes_dot_files() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 12);
    let config = toy_config(tmp.path(), "");
    let run_dir = tmp.path().join("run");
    run_ok(
        wsgat()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&run_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );

    let export_dir = tmp.path().join("dots");
    run_ok(
        wsgat()
            .arg("export-topk")
            .arg("--config")
            .arg(&config)
            .arg("--checkpoint")
            .arg(run_dir.join("model.ckpt"))
            .arg("--graph")
            .arg("0")
            .arg("--out")
            .arg(&export_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    let dots: Vec<_> = std::fs::read_dir(&export_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    // k = 3 subgraphs plus the parent overview.
    assert_eq!(dots.len(), 4, "files: {dots:?}");
    assert!(dots.iter().any(|f| f == "graph_0.dot"));
}

#[test]
fn export_topk_rejects_out_of_range_graph() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 6, 12);
    let config = toy_config(tmp.path(), "");
    let run_dir = tmp.path().join("run");
    run_ok(
        wsgat()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&run_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    let out = wsgat()
        .arg("export-topk")
        .arg("--config")
        .arg(&config)
        .arg("--checkpoint")
        .arg(run_dir.join("model.ckpt"))
        .arg("--graph")
        .arg("999")
        .env("WSGAT_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn export_topk_with_empty_extraction_is_a_notice_not_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 6, 12);
    let config = toy_config(tmp.path(), "");
    let run_dir = tmp.path().join("run");
    run_ok(
        wsgat()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&run_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    // Impossible thresholds: extraction yields nothing.
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("min_nodes = 3", "min_nodes = 10000");
    std::fs::write(&config, text).unwrap();

    let export_dir = tmp.path().join("dots");
    let out = run_ok(
        wsgat()
            .arg("export-topk")
            .arg("--config")
            .arg(&config)
            .arg("--checkpoint")
            .arg(run_dir.join("model.ckpt"))
            .arg("--graph")
            .arg("0")
            .arg("--out")
            .arg(&export_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("no subgraphs"), "stdout: {stdout}");
    assert!(!export_dir.exists() || std::fs::read_dir(&export_dir).unwrap().count() == 0);
}

#[test]
fn subset_flag_restricts_the_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 12, 10);
    let config = toy_config(tmp.path(), "");
    let out_dir = tmp.path().join("out");
    run_ok(
        wsgat()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .arg("--subset")
            .arg("6")
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("num_graphs = 6"), "manifest: {manifest}");
}

#[test]
fn manifest_records_resolved_window_size() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 8, 12);
    // Window from fraction: 0.5 x 12 = 6.
    let config = tmp.path().join("frac.toml");
    std::fs::write(
        &config,
        r#"
[dataset]
name = "TOY"

[extraction]
window_fraction = 0.5
min_nodes = 3
min_edges = 2

[model]
hidden_dim = 4
num_heads = 2
out_hidden = 8

[train]
epochs = 2
"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    run_ok(
        wsgat()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .env("WSGAT_DATA_DIR", tmp.path()),
    );
    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("window_size = 6"), "manifest: {manifest}");
    assert!(manifest.contains("window_fraction = 0.5"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    toy_corpus(tmp.path(), 6, 10);
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "[dataset]\nname = \"TOY\"\ntypo_field = 1\n").unwrap();
    let out = wsgat()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .env("WSGAT_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("typo_field"), "stderr: {stderr}");
}
