//! The fixed two-layer graph attention architecture.
//!
//! Layer 1 runs `num_heads` independent attention heads over the same
//! input, applies ELU per head and concatenates; layer 2 is a single head
//! followed by ELU; node embeddings are mean-pooled into a graph vector and
//! classified by a fully connected layer. Dropout follows each layer's
//! activation in training mode. Per-edge attention coefficients are
//! captured into an [`AttentionRecord`] so inference can rank subgraphs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::Subgraph;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::tape::{Tape, TensorId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatConfig {
    /// Input feature width; equals the dataset's node-label count.
    pub in_dim: usize,
    /// Output width of each first-layer head.
    pub hidden_dim: usize,
    /// First-layer head count.
    pub num_heads: usize,
    /// Output width of the single second-layer head.
    pub out_hidden: usize,
    pub num_classes: usize,
    /// Negative slope inside the attention score nonlinearity.
    pub leaky_slope: f64,
    /// Feature dropout rate applied after each layer in training.
    pub dropout_p: f64,
    /// Add a self-loop to every node before attention.
    pub add_self_loops: bool,
}

impl GatConfig {
    pub fn new(in_dim: usize, num_classes: usize) -> Self {
        Self {
            in_dim,
            hidden_dim: 8,
            num_heads: 8,
            out_hidden: 64,
            num_classes,
            leaky_slope: 0.2,
            dropout_p: 0.6,
            add_self_loops: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim < 1 || self.num_classes < 1 {
            return Err(Error::Config("in_dim and num_classes must be >= 1".into()));
        }
        if self.hidden_dim < 1 || self.num_heads < 1 || self.out_hidden < 1 {
            return Err(Error::Config(
                "hidden_dim, num_heads and out_hidden must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config(format!(
                "leaky_slope must be in (0, 1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }
}

/// One attention head: a projection and the attention vector scoring
/// concatenated (destination, source) projections.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead<S> {
    pub weight: Matrix<S>,
    pub attn: Matrix<S>,
}

/// All learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GatModel<S> {
    pub heads: Vec<AttentionHead<S>>,
    pub layer2: AttentionHead<S>,
    pub w_out: Matrix<S>,
    /// `(1, num_classes)` bias row.
    pub b_out: Matrix<S>,
}

impl<S: Scalar> GatModel<S> {
    /// Parameter blocks in canonical order; the optimizer, checkpoints and
    /// gradient collection all index this order.
    pub fn blocks(&self) -> Vec<&Matrix<S>> {
        let mut out = Vec::with_capacity(self.heads.len() * 2 + 4);
        for h in &self.heads {
            out.push(&h.weight);
            out.push(&h.attn);
        }
        out.push(&self.layer2.weight);
        out.push(&self.layer2.attn);
        out.push(&self.w_out);
        out.push(&self.b_out);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Matrix<S>> {
        let mut out = Vec::with_capacity(self.heads.len() * 2 + 4);
        for h in &mut self.heads {
            out.push(&mut h.weight);
            out.push(&mut h.attn);
        }
        out.push(&mut self.layer2.weight);
        out.push(&mut self.layer2.attn);
        out.push(&mut self.w_out);
        out.push(&mut self.b_out);
        out
    }

    pub fn block_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for k in 0..self.heads.len() {
            out.push(format!("w1.{k}"));
            out.push(format!("a1.{k}"));
        }
        out.extend(["w2".into(), "a2".into(), "w_out".into(), "b_out".into()]);
        out
    }

    /// Which blocks receive weight decay: everything except the output bias.
    pub fn decay_flags(&self) -> Vec<bool> {
        let n = self.heads.len() * 2 + 4;
        let mut flags = vec![true; n];
        flags[n - 1] = false;
        flags
    }

    pub fn validate_shapes(&self, cfg: &GatConfig) -> Result<()> {
        let expect = |name: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                Err(Error::Config(format!(
                    "parameter {name} has shape {got:?}, config implies {want:?}"
                )))
            } else {
                Ok(())
            }
        };
        if self.heads.len() != cfg.num_heads {
            return Err(Error::Config(format!(
                "{} heads for num_heads={}",
                self.heads.len(),
                cfg.num_heads
            )));
        }
        for (k, h) in self.heads.iter().enumerate() {
            expect(&format!("w1.{k}"), h.weight.shape(), (cfg.in_dim, cfg.hidden_dim))?;
            expect(&format!("a1.{k}"), h.attn.shape(), (2 * cfg.hidden_dim, 1))?;
        }
        expect(
            "w2",
            self.layer2.weight.shape(),
            (cfg.num_heads * cfg.hidden_dim, cfg.out_hidden),
        )?;
        expect("a2", self.layer2.attn.shape(), (2 * cfg.out_hidden, 1))?;
        expect("w_out", self.w_out.shape(), (cfg.out_hidden, cfg.num_classes))?;
        expect("b_out", self.b_out.shape(), (1, cfg.num_classes))?;
        Ok(())
    }
}

/// Gradients aligned with [`GatModel::blocks`] order.
#[derive(Debug, Clone)]
pub struct GatGrads<S> {
    pub blocks: Vec<Matrix<S>>,
}

impl<S: Scalar> GatGrads<S> {
    pub fn zeros_like(model: &GatModel<S>) -> Self {
        Self {
            blocks: model
                .blocks()
                .iter()
                .map(|b| Matrix::zeros(b.rows(), b.cols()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.add_scaled_assign(b, S::one())?;
        }
        Ok(())
    }

    pub fn scale_assign(&mut self, c: S) {
        for b in &mut self.blocks {
            for v in b.data_mut() {
                *v *= c;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(Matrix::is_finite)
    }
}

/// Glorot-uniform initialization, deterministic per seed. Attention
/// vectors are treated as `(fan_in, 1)` projections; the output bias
/// starts at zero.
pub fn init_params<S: Scalar>(cfg: &GatConfig, seed: u64) -> Result<GatModel<S>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glorot = |rows: usize, cols: usize| {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| S::cast(rng.random_range(-limit..limit)))
            .collect();
        Matrix::from_vec(rows, cols, data).expect("sized by construction")
    };
    let heads = (0..cfg.num_heads)
        .map(|_| AttentionHead {
            weight: glorot(cfg.in_dim, cfg.hidden_dim),
            attn: glorot(2 * cfg.hidden_dim, 1),
        })
        .collect();
    let layer2 = AttentionHead {
        weight: glorot(cfg.num_heads * cfg.hidden_dim, cfg.out_hidden),
        attn: glorot(2 * cfg.out_hidden, 1),
    };
    let w_out = glorot(cfg.out_hidden, cfg.num_classes);
    let b_out = Matrix::zeros(1, cfg.num_classes);
    Ok(GatModel {
        heads,
        layer2,
        w_out,
        b_out,
    })
}

/// Directed edges prepared for attention: sorted `(dst, src)` pairs, the
/// destination of each entry doubling as its softmax segment id.
#[derive(Debug, Clone)]
pub struct EdgeStructure {
    pub num_nodes: usize,
    pub dst: Vec<usize>,
    pub src: Vec<usize>,
    /// Incoming edge count per node (self-loop included when added).
    pub in_degree: Vec<usize>,
    /// Nodes with no incoming edge; their aggregated rows are zero.
    pub isolated: Vec<usize>,
}

impl EdgeStructure {
    pub fn new(num_nodes: usize, edges: &[(usize, usize)], add_self_loops: bool) -> Self {
        let mut pairs: Vec<(usize, usize)> = edges.to_vec();
        if add_self_loops {
            pairs.extend((0..num_nodes).map(|v| (v, v)));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut in_degree = vec![0usize; num_nodes];
        for &(d, _) in &pairs {
            in_degree[d] += 1;
        }
        let isolated = (0..num_nodes).filter(|&v| in_degree[v] == 0).collect();
        Self {
            num_nodes,
            dst: pairs.iter().map(|&(d, _)| d).collect(),
            src: pairs.iter().map(|&(_, s)| s).collect(),
            in_degree,
            isolated,
        }
    }
}

/// Per-edge attention coefficients of one forward pass.
#[derive(Debug, Clone)]
pub struct AttentionRecord<S> {
    pub layers: Vec<LayerAttention<S>>,
}

#[derive(Debug, Clone)]
pub struct LayerAttention<S> {
    /// One `(dst, src, alpha)` list per head.
    pub heads: Vec<Vec<(usize, usize, S)>>,
    /// Destinations that received no messages this layer.
    pub isolated: Vec<usize>,
}

impl<S: Scalar> AttentionRecord<S> {
    /// Triples of the final layer's single head.
    pub fn final_layer_triples(&self) -> &[(usize, usize, S)] {
        self.layers
            .last()
            .and_then(|l| l.heads.first())
            .map(|h| h.as_slice())
            .unwrap_or(&[])
    }
}

/// One attention head over `es`: projects `h`, scores each directed edge
/// with `LeakyReLU(a^T [z_dst || z_src])`, normalizes per destination, and
/// returns the attention-weighted source sum (pre-activation) along with
/// the coefficients.
#[allow(clippy::type_complexity)]
pub fn attention_layer<S: Scalar>(
    tape: &mut Tape<S>,
    h: TensorId,
    es: &EdgeStructure,
    weight: TensorId,
    attn: TensorId,
    slope: S,
) -> Result<(TensorId, Vec<(usize, usize, S)>)> {
    let z = tape.matmul(h, weight)?;
    let z_dst = tape.gather_rows(z, &es.dst)?;
    let z_src = tape.gather_rows(z, &es.src)?;
    let cat = tape.concat_cols(&[z_dst, z_src])?;
    let logits = tape.matmul(cat, attn)?;
    let logits = tape.leaky_relu(logits, slope)?;
    let alpha = tape.segment_softmax(logits, &es.dst, es.num_nodes)?;
    let out = tape.segment_weighted_sum(z_src, alpha, &es.dst, es.num_nodes)?;

    let alpha_values = tape.value(alpha);
    let triples = es
        .dst
        .iter()
        .zip(&es.src)
        .enumerate()
        .map(|(e, (&d, &s))| (d, s, alpha_values[(e, 0)]))
        .collect();
    Ok((out, triples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Tape leaves holding the model parameters, in block order.
#[derive(Debug, Clone)]
pub struct ParamIds {
    pub blocks: Vec<TensorId>,
}

/// A completed forward pass. The tape stays alive so a caller can attach a
/// loss and run backward; gradients are then read with [`collect_grads`].
pub struct ForwardPass<S> {
    pub tape: Tape<S>,
    pub params: ParamIds,
    /// `(1, num_classes)` pre-softmax scores.
    pub logits: TensorId,
    /// Softmax of the logits.
    pub probs: Matrix<S>,
    /// Node embeddings after the second layer's activation.
    pub node_embeddings: TensorId,
    pub attention: AttentionRecord<S>,
}

pub fn forward<S: Scalar, R: Rng>(
    model: &GatModel<S>,
    sub: &Subgraph<S>,
    cfg: &GatConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardPass<S>> {
    if sub.features.cols() != cfg.in_dim {
        return Err(Error::Config(format!(
            "subgraph feature width {} does not match model in_dim {}",
            sub.features.cols(),
            cfg.in_dim
        )));
    }
    model.validate_shapes(cfg)?;
    let train = mode == Mode::Train;
    let slope = S::cast(cfg.leaky_slope);
    let es = EdgeStructure::new(sub.num_nodes(), &sub.edges, cfg.add_self_loops);

    let mut tape = Tape::new();
    let params = ParamIds {
        blocks: model
            .blocks()
            .into_iter()
            .map(|b| tape.leaf(b.clone(), train))
            .collect(),
    };
    let h0 = tape.leaf(sub.features.as_matrix().clone(), false);

    // Layer 1: per-head attention, ELU, concatenate, dropout.
    let mut head_outputs = Vec::with_capacity(cfg.num_heads);
    let mut head_triples = Vec::with_capacity(cfg.num_heads);
    for k in 0..cfg.num_heads {
        let (out, triples) = attention_layer(
            &mut tape,
            h0,
            &es,
            params.blocks[2 * k],
            params.blocks[2 * k + 1],
            slope,
        )?;
        head_outputs.push(tape.elu(out));
        head_triples.push(triples);
    }
    let h1 = tape.concat_cols(&head_outputs)?;
    let h1 = tape.dropout(h1, cfg.dropout_p, rng, train)?;

    // Layer 2: single head, ELU, dropout.
    let base = 2 * cfg.num_heads;
    let (out2, triples2) = attention_layer(
        &mut tape,
        h1,
        &es,
        params.blocks[base],
        params.blocks[base + 1],
        slope,
    )?;
    let h2 = tape.elu(out2);
    let h2 = tape.dropout(h2, cfg.dropout_p, rng, train)?;

    // Readout and classifier.
    let pooled = tape.mean_rows(h2)?;
    let scores = tape.matmul(pooled, params.blocks[base + 2])?;
    let logits = tape.add_bias(scores, params.blocks[base + 3])?;

    let probs = softmax_row(tape.value(logits));
    let attention = AttentionRecord {
        layers: vec![
            LayerAttention {
                heads: head_triples,
                isolated: es.isolated.clone(),
            },
            LayerAttention {
                heads: vec![triples2],
                isolated: es.isolated.clone(),
            },
        ],
    };
    Ok(ForwardPass {
        tape,
        params,
        logits,
        probs,
        node_embeddings: h2,
        attention,
    })
}

/// Evaluation-mode forward with no randomness.
pub fn forward_eval<S: Scalar>(
    model: &GatModel<S>,
    sub: &Subgraph<S>,
    cfg: &GatConfig,
) -> Result<ForwardPass<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    forward(model, sub, cfg, Mode::Eval, &mut rng)
}

/// Reads parameter gradients out of a completed backward pass.
pub fn collect_grads<S: Scalar>(pass: &ForwardPass<S>) -> Result<GatGrads<S>> {
    let blocks = pass
        .params
        .blocks
        .iter()
        .map(|&id| {
            pass.tape
                .grad(id)
                .cloned()
                .ok_or_else(|| Error::Contract("parameter gradient missing; run backward first".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GatGrads { blocks })
}

fn softmax_row<S: Scalar>(logits: &Matrix<S>) -> Matrix<S> {
    let row = logits.row(0);
    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = row.iter().map(|&v| (v - m).exp()).collect();
    let total: S = exps.iter().copied().sum();
    Matrix::from_vec(1, logits.cols(), exps.into_iter().map(|e| e / total).collect())
        .expect("same length")
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CHECKPOINT_HEADER: &str = "wsgat-checkpoint v1";

/// Writes config and parameters as versioned plain text. Float values use
/// shortest round-trip formatting, so saving is byte-stable and a
/// save/load cycle is bit-exact.
pub fn save_checkpoint<S: Scalar>(
    model: &GatModel<S>,
    cfg: &GatConfig,
    path: &Path,
) -> Result<()> {
    model.validate_shapes(cfg)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CHECKPOINT_HEADER}")?;
    writeln!(w, "in_dim {}", cfg.in_dim)?;
    writeln!(w, "hidden_dim {}", cfg.hidden_dim)?;
    writeln!(w, "num_heads {}", cfg.num_heads)?;
    writeln!(w, "out_hidden {}", cfg.out_hidden)?;
    writeln!(w, "num_classes {}", cfg.num_classes)?;
    writeln!(w, "leaky_slope {}", cfg.leaky_slope)?;
    writeln!(w, "dropout_p {}", cfg.dropout_p)?;
    writeln!(w, "add_self_loops {}", cfg.add_self_loops)?;
    for (name, block) in model.block_names().iter().zip(model.blocks()) {
        writeln!(w, "block {name} {} {}", block.rows(), block.cols())?;
        for i in 0..block.rows() {
            let line: Vec<String> = block.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    writeln!(w, "end")?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<(GatModel<S>, GatConfig)> {
    let bad = |msg: String| Error::Checkpoint(msg);
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| bad("unexpected end of file".into()))
    };

    let header = next()?;
    if header != CHECKPOINT_HEADER {
        return Err(bad(format!("unrecognized header {header:?}")));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = next()?;
        line.strip_prefix(&format!("{name} "))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected field {name}, found {line:?}")))
    };
    let parse_usize = |v: String| -> Result<usize> {
        v.parse().map_err(|_| bad(format!("bad integer {v:?}")))
    };
    let parse_f64 =
        |v: String| -> Result<f64> { v.parse().map_err(|_| bad(format!("bad float {v:?}"))) };

    let cfg = GatConfig {
        in_dim: parse_usize(field("in_dim")?)?,
        hidden_dim: parse_usize(field("hidden_dim")?)?,
        num_heads: parse_usize(field("num_heads")?)?,
        out_hidden: parse_usize(field("out_hidden")?)?,
        num_classes: parse_usize(field("num_classes")?)?,
        leaky_slope: parse_f64(field("leaky_slope")?)?,
        dropout_p: parse_f64(field("dropout_p")?)?,
        add_self_loops: {
            let v = field("add_self_loops")?;
            match v.as_str() {
                "true" => true,
                "false" => false,
                _ => return Err(bad(format!("bad bool {v:?}"))),
            }
        },
    };

    // Blocks arrive in canonical order; shapes line up with the config.
    let mut placeholder = init_params::<S>(&cfg, 0)?;
    let expected_names = placeholder.block_names();
    for (name, block) in expected_names.iter().zip(placeholder.blocks_mut()) {
        let head = next()?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "block" || parts[1] != name {
            return Err(bad(format!("expected `block {name} r c`, found {head:?}")));
        }
        let rows = parse_usize(parts[2].into())?;
        let cols = parse_usize(parts[3].into())?;
        if (rows, cols) != block.shape() {
            return Err(bad(format!(
                "block {name} has shape ({rows}, {cols}), config implies {:?}",
                block.shape()
            )));
        }
        for i in 0..rows {
            let line = next()?;
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != cols {
                return Err(bad(format!(
                    "block {name} row {i} has {} values, expected {cols}",
                    values.len()
                )));
            }
            for (j, v) in values.iter().enumerate() {
                block.row_mut(i)[j] = v
                    .parse::<S>()
                    .map_err(|_| bad(format!("bad value {v:?} in block {name}")))?;
            }
        }
    }
    let tail = next()?;
    if tail != "end" {
        return Err(bad(format!("expected trailing `end`, found {tail:?}")));
    }
    Ok((placeholder, cfg))
}
