//! Run configuration: the TOML file schema, its defaults, dataset
//! resolution, and the reproducibility manifest.
//!
//! Every training-protocol constant has a default, so pointing `run` at a
//! dataset with no config file reproduces the standard protocol
//! (lr 0.01, weight decay 5e-4, 100 epochs, dropout 0.6, 80/20 split).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wsgat_core::extract::{ExtractionConfig, Method};
use wsgat_core::graph::Dataset;
use wsgat_core::model::GatConfig;
use wsgat_core::train::TrainConfig;
use wsgat_core::tudataset::parse_tu_dataset;
use wsgat_core::weaksup::{Aggregation, TopKConfig};

use crate::CliError;

pub const DATA_DIR_ENV: &str = "WSGAT_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Subgraph extraction, weak labels, top-K aggregation.
    Subgraph,
    /// Whole-graph training and evaluation, no extraction.
    Baseline,
}

/// The config file as written by the user; everything is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<RunMode>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Deterministic sample of this many graphs (0 = all).
    pub subset: Option<usize>,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub extraction: ExtractionSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub topk: TopkSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub name: Option<String>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionSection {
    pub method: Option<Method>,
    /// Sliding window length as a fraction of the dataset's mean graph
    /// size; ignored when `window_size` is set explicitly.
    pub window_fraction: Option<f64>,
    pub window_size: Option<usize>,
    /// Defaults to half the window.
    pub step_size: Option<usize>,
    pub depth_limit: Option<usize>,
    pub samples_per_graph: Option<usize>,
    pub min_nodes: Option<usize>,
    pub min_edges: Option<usize>,
    /// Write an audit dump of the training subgraphs.
    #[serde(default)]
    pub dump_subgraphs: bool,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        Self {
            method: None,
            window_fraction: None,
            window_size: None,
            step_size: None,
            depth_limit: None,
            samples_per_graph: None,
            min_nodes: None,
            min_edges: None,
            dump_subgraphs: false,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dim: Option<usize>,
    pub num_heads: Option<usize>,
    pub out_hidden: Option<usize>,
    pub leaky_slope: Option<f64>,
    pub dropout_p: Option<f64>,
    pub add_self_loops: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub split_fraction: Option<f64>,
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopkSection {
    pub k: Option<usize>,
    pub aggregation: Option<Aggregation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub repeats: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    WindowFraction,
    DepthLimit,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    /// Field-level validation that does not need the dataset.
    pub fn validate_fields(&self) -> Result<(), CliError> {
        let model = &self.model;
        if let Some(p) = model.dropout_p {
            if !(0.0..1.0).contains(&p) {
                return Err(CliError::Config(format!(
                    "dropout_p must be in [0, 1), got {p}"
                )));
            }
        }
        if let Some(s) = model.leaky_slope {
            if !(s > 0.0 && s < 1.0) {
                return Err(CliError::Config(format!(
                    "leaky_slope must be in (0, 1), got {s}"
                )));
            }
        }
        if let Some(lr) = self.train.lr {
            if lr <= 0.0 {
                return Err(CliError::Config(format!("lr must be > 0, got {lr}")));
            }
        }
        if let Some(f) = self.train.split_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(CliError::Config(format!(
                    "split_fraction must be in (0, 1), got {f}"
                )));
            }
        }
        if let Some(f) = self.extraction.window_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(CliError::Config(format!(
                    "window_fraction must be in (0, 1], got {f}"
                )));
            }
        }
        if let Some(k) = self.topk.k {
            if k < 1 {
                return Err(CliError::Config("topk.k must be >= 1".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep.values must be non-empty".into()));
            }
            if sweep.values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Config(
                    "sweep.values must be strictly increasing".into(),
                ));
            }
            if sweep.repeats < 1 {
                return Err(CliError::Config("sweep.repeats must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Everything a run needs, with all defaults applied and the dataset
/// loaded.
pub struct ResolvedRun {
    pub dataset_name: String,
    pub dataset_dir: PathBuf,
    pub ds: Dataset,
    pub mode: RunMode,
    pub ext: ExtractionConfig,
    pub gat: GatConfig,
    pub tr: TrainConfig,
    pub topk: TopKConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub subset: usize,
    pub window_fraction: Option<f64>,
    pub dump_subgraphs: bool,
}

/// Command-line overrides that beat the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub dataset: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub subset: Option<usize>,
}

pub fn resolve(
    file: &FileConfig,
    over: &Overrides,
    default_out: &str,
) -> Result<ResolvedRun, CliError> {
    file.validate_fields()?;

    let dataset_name = over
        .dataset
        .clone()
        .or_else(|| file.dataset.name.clone())
        .ok_or_else(|| {
            CliError::Config("no dataset given; set [dataset].name or pass --dataset".into())
        })?;
    let dataset_dir = resolve_dataset_dir(&dataset_name, file.dataset.path.as_deref())?;
    let ds = parse_tu_dataset(&dataset_dir, &dataset_name)
        .map_err(|e| CliError::Config(format!("cannot load dataset {dataset_name}: {e}")))?;

    let seed = over.seed.or(file.seed).unwrap_or(0);
    let subset = over.subset.or(file.subset).unwrap_or(0);
    let mode = file.mode.unwrap_or(RunMode::Subgraph);

    let method = file.extraction.method.unwrap_or(Method::SlidingWindow);
    let window_fraction = match (file.extraction.window_size, file.extraction.window_fraction) {
        (Some(_), _) => file.extraction.window_fraction,
        (None, Some(f)) => Some(f),
        (None, None) => Some(0.5),
    };
    let window_size = match file.extraction.window_size {
        Some(w) if w > 0 => w,
        _ => wsgat_core::extract::window_size_from_fraction(
            &ds,
            window_fraction.expect("fraction defaulted above"),
        )
        .map_err(|e| CliError::Config(e.to_string()))?,
    };
    let ext = ExtractionConfig {
        method,
        depth_limit: file.extraction.depth_limit.unwrap_or(11),
        samples_per_graph: file.extraction.samples_per_graph.unwrap_or(5),
        min_nodes: file.extraction.min_nodes.unwrap_or(5),
        min_edges: file.extraction.min_edges.unwrap_or(4),
        window_size,
        step_size: match file.extraction.step_size {
            Some(s) if s > 0 => s,
            _ => (window_size / 2).max(1),
        },
        seed,
    };
    ext.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let ds = apply_subset(ds, subset, seed);

    let model = &file.model;
    let gat = GatConfig {
        in_dim: ds.num_node_labels,
        hidden_dim: model.hidden_dim.unwrap_or(8),
        num_heads: model.num_heads.unwrap_or(8),
        out_hidden: model.out_hidden.unwrap_or(64),
        num_classes: ds.num_classes,
        leaky_slope: model.leaky_slope.unwrap_or(0.2),
        dropout_p: model.dropout_p.unwrap_or(0.6),
        add_self_loops: model.add_self_loops.unwrap_or(true),
    };
    gat.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let tr = TrainConfig {
        lr: file.train.lr.unwrap_or(0.01),
        weight_decay: file.train.weight_decay.unwrap_or(5e-4),
        epochs: file.train.epochs.unwrap_or(100),
        dropout_p: gat.dropout_p,
        split_fraction: file.train.split_fraction.unwrap_or(0.8),
        seed,
        batch: file.train.batch.unwrap_or(32),
    };
    tr.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let topk = TopKConfig {
        k: file.topk.k.unwrap_or(3),
        aggregation: file.topk.aggregation.unwrap_or(Aggregation::MeanProbs),
    };

    let out_dir = over
        .out
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(default_out));

    Ok(ResolvedRun {
        dataset_name,
        dataset_dir,
        ds,
        mode,
        ext,
        gat,
        tr,
        topk,
        out_dir,
        seed,
        subset,
        window_fraction,
        dump_subgraphs: file.extraction.dump_subgraphs,
    })
}

/// Deterministic sample of `subset` graphs (seeded shuffle, then the
/// prefix), with ids re-densified. `0` keeps the whole dataset.
fn apply_subset(ds: Dataset, subset: usize, seed: u64) -> Dataset {
    if subset == 0 || subset >= ds.graphs.len() {
        return ds;
    }
    let mut ids: Vec<usize> = (0..ds.graphs.len()).collect();
    wsgat_core::seeds::shuffle(&mut ids, &mut wsgat_core::seeds::rng(seed, 0x5b5e7));
    ids.truncate(subset);
    ids.sort_unstable();
    let mut graphs: Vec<_> = ids.into_iter().map(|i| ds.graphs[i].clone()).collect();
    for (new_id, g) in graphs.iter_mut().enumerate() {
        g.id = new_id;
    }
    Dataset::new(ds.name, graphs).expect("subset is non-empty")
}

/// Locates a dataset directory: an explicit path (or its `<name>/`
/// subdirectory), else `$WSGAT_DATA_DIR/<name>`, else `./data/<name>`.
pub fn resolve_dataset_dir(name: &str, explicit: Option<&Path>) -> Result<PathBuf, CliError> {
    let marker = format!("{name}_A.txt");
    let mut candidates: Vec<PathBuf> = Vec::new();
    if let Some(p) = explicit {
        candidates.push(p.to_path_buf());
        candidates.push(p.join(name));
    } else {
        let root = std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data"));
        candidates.push(root.join(name));
        candidates.push(root.join(name).join(name));
        candidates.push(root);
    }
    for cand in &candidates {
        if cand.join(&marker).is_file() {
            return Ok(cand.clone());
        }
    }
    Err(CliError::Config(format!(
        "dataset {name} not found (looked for {marker} under {}); \
         fetch it with `wsgat fetch --dataset {name}`",
        candidates
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )))
}

/// The fully resolved configuration written next to every run's outputs;
/// replaying it reproduces the run bit for bit.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub dataset: &'a str,
    pub dataset_dir: String,
    pub mode: RunMode,
    pub seed: u64,
    pub subset: usize,
    pub num_graphs: usize,
    pub num_classes: usize,
    pub num_node_labels: usize,
    pub mean_nodes: f64,
    pub window_fraction: Option<f64>,
    pub extraction: &'a ExtractionConfig,
    pub model: &'a GatConfig,
    pub train: &'a TrainConfig,
    pub topk: &'a TopKConfig,
}

impl<'a> Manifest<'a> {
    pub fn new(rc: &'a ResolvedRun) -> Self {
        Self {
            dataset: &rc.dataset_name,
            dataset_dir: rc.dataset_dir.display().to_string(),
            mode: rc.mode,
            seed: rc.seed,
            subset: rc.subset,
            num_graphs: rc.ds.graphs.len(),
            num_classes: rc.ds.num_classes,
            num_node_labels: rc.ds.num_node_labels,
            mean_nodes: rc.ds.mean_nodes,
            window_fraction: rc.window_fraction,
            extraction: &rc.ext,
            model: &rc.gat,
            train: &rc.tr,
            topk: &rc.topk,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("manifest serialization: {e}")))?;
        std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("writing manifest: {e}")))?;
        Ok(())
    }
}
