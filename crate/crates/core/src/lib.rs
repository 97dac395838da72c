//! Weakly-supervised graph classification toolkit.
//!
//! The pipeline: parse a TUDataset corpus, extract subgraph instances from
//! each graph (BFS balls or sliding windows), train a two-layer graph
//! attention network on subgraphs that inherit their parent's class label,
//! then classify whole graphs by aggregating the predictions of the K
//! subgraphs with the most concentrated attention.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which the CLI and the training
//! pipeline use throughout.

pub mod error;
pub mod extract;
pub mod gradcheck;
pub mod graph;
pub mod matrix;
pub mod model;
pub mod scalar;
pub mod seeds;
pub mod synthetic;
pub mod tape;
pub mod train;
pub mod tudataset;
pub mod weaksup;

pub use error::{Error, Result};
pub use extract::{ExtractionConfig, Method};
pub use graph::{Dataset, Graph};
pub use model::{GatConfig, Mode};
pub use scalar::Scalar;
pub use train::{EpochLog, TrainConfig};
pub use weaksup::{Aggregation, TopKConfig};

pub type Matrix = matrix::Matrix<f64>;
pub type FeatureMatrix = graph::FeatureMatrix<f64>;
pub type Subgraph = extract::Subgraph<f64>;
pub type Tape = tape::Tape<f64>;
pub type GatModel = model::GatModel<f64>;
pub type GatGrads = model::GatGrads<f64>;
pub type ForwardPass = model::ForwardPass<f64>;
pub type AttentionRecord = model::AttentionRecord<f64>;
pub type AdamState = train::AdamState<f64>;
pub type TrainOutcome = train::TrainOutcome<f64>;
