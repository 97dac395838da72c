//! Recorded computation graph with reverse-mode gradients.
//!
//! Operations append nodes to a [`Tape`]; node ids are handed back as
//! [`TensorId`]s. Recording order is construction order, so the tape is
//! topological by construction and [`Tape::backward`] is a single reverse
//! sweep that accumulates gradients additively into every node that needs
//! them. The op set is exactly what the attention model's forward pass
//! uses; there is no broadcasting beyond the row-wise bias add.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

#[derive(Debug)]
enum Op<S> {
    Leaf,
    MatMul(TensorId, TensorId),
    Add(TensorId, TensorId),
    Scale(TensorId, S),
    LeakyRelu(TensorId, S),
    Elu(TensorId),
    ConcatCols(Vec<TensorId>),
    GatherRows(TensorId, Vec<usize>),
    MeanRows(TensorId),
    AddBias(TensorId, TensorId),
    SegmentSoftmax {
        logits: TensorId,
        segments: Vec<usize>,
        num_segments: usize,
    },
    SegmentWeightedSum {
        values: TensorId,
        weights: TensorId,
        segments: Vec<usize>,
    },
    LogSoftmaxRows(TensorId),
    Dropout(TensorId, Vec<S>),
    Pick(TensorId, usize, usize),
    SumAll(TensorId),
}

#[derive(Debug)]
struct Node<S> {
    value: Matrix<S>,
    grad: Option<Matrix<S>>,
    op: Op<S>,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Enters a value onto the tape. Gradients are only retained for nodes
    /// reachable from leaves entered with `requires_grad`.
    pub fn leaf(&mut self, value: Matrix<S>, requires_grad: bool) -> TensorId {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn value(&self, t: TensorId) -> &Matrix<S> {
        &self.nodes[t.0].value
    }

    /// Gradient of the last `backward` loss w.r.t. this node, if retained.
    pub fn grad(&self, t: TensorId) -> Option<&Matrix<S>> {
        self.nodes[t.0].grad.as_ref()
    }

    pub fn shape(&self, t: TensorId) -> (usize, usize) {
        self.nodes[t.0].value.shape()
    }

    fn push(&mut self, value: Matrix<S>, op: Op<S>, needs_grad: bool) -> TensorId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn needs(&self, t: TensorId) -> bool {
        self.nodes[t.0].needs_grad
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let value = self.value(a).matmul(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), needs))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let value = self.value(a).add(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn scale(&mut self, x: TensorId, c: S) -> TensorId {
        let value = self.value(x).scale(c);
        let needs = self.needs(x);
        self.push(value, Op::Scale(x, c), needs)
    }

    /// Elementwise `max(x, slope * x)`. The derivative at exactly zero is
    /// the slope side.
    pub fn leaky_relu(&mut self, x: TensorId, slope: S) -> Result<TensorId> {
        if !(slope > S::zero() && slope < S::one()) {
            return Err(Error::Contract(format!(
                "leaky_relu slope must be in (0, 1), got {slope}"
            )));
        }
        let value = self
            .value(x)
            .map(|v| if v > S::zero() { v } else { slope * v });
        let needs = self.needs(x);
        Ok(self.push(value, Op::LeakyRelu(x, slope), needs))
    }

    /// Elementwise `x > 0 ? x : exp(x) - 1`.
    pub fn elu(&mut self, x: TensorId) -> TensorId {
        let value = self
            .value(x)
            .map(|v| if v > S::zero() { v } else { v.exp() - S::one() });
        let needs = self.needs(x);
        self.push(value, Op::Elu(x), needs)
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, inputs: &[TensorId]) -> Result<TensorId> {
        if inputs.is_empty() {
            return Err(Error::Contract("concat_cols of zero inputs".into()));
        }
        let rows = self.shape(inputs[0]).0;
        let mut cols = 0;
        for &t in inputs {
            let (r, c) = self.shape(t);
            if r != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: (rows, cols),
                    rhs: (r, c),
                });
            }
            cols += c;
        }
        let mut value = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &t in inputs {
            let m = self.value(t);
            let c = m.cols();
            for i in 0..rows {
                value.row_mut(i)[offset..offset + c].copy_from_slice(m.row(i));
            }
            offset += c;
        }
        let needs = inputs.iter().any(|&t| self.needs(t));
        Ok(self.push(value, Op::ConcatCols(inputs.to_vec()), needs))
    }

    /// Row selection; an index may repeat.
    pub fn gather_rows(&mut self, x: TensorId, indices: &[usize]) -> Result<TensorId> {
        let (rows, cols) = self.shape(x);
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Contract(format!(
                "gather_rows index {bad} out of range for {rows} rows"
            )));
        }
        let mut value = Matrix::zeros(indices.len(), cols);
        for (new, &old) in indices.iter().enumerate() {
            value.row_mut(new).copy_from_slice(self.value(x).row(old));
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::GatherRows(x, indices.to_vec()), needs))
    }

    /// Column means as a `(1, cols)` row.
    pub fn mean_rows(&mut self, x: TensorId) -> Result<TensorId> {
        let (rows, cols) = self.shape(x);
        if rows == 0 {
            return Err(Error::Contract("mean_rows of an empty matrix".into()));
        }
        let mut value = Matrix::zeros(1, cols);
        for i in 0..rows {
            let row = self.value(x).row(i);
            for j in 0..cols {
                value[(0, j)] += row[j];
            }
        }
        let inv = S::one() / S::from_usize(rows).unwrap();
        for j in 0..cols {
            value[(0, j)] *= inv;
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::MeanRows(x), needs))
    }

    /// Adds a `(1, cols)` bias row to every row of `x`.
    pub fn add_bias(&mut self, x: TensorId, bias: TensorId) -> Result<TensorId> {
        let (rows, cols) = self.shape(x);
        if self.shape(bias) != (1, cols) {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: (rows, cols),
                rhs: self.shape(bias),
            });
        }
        let mut value = self.value(x).clone();
        for i in 0..rows {
            let b = self.nodes[bias.0].value.row(0).to_vec();
            for (v, bv) in value.row_mut(i).iter_mut().zip(b) {
                *v += bv;
            }
        }
        let needs = self.needs(x) || self.needs(bias);
        Ok(self.push(value, Op::AddBias(x, bias), needs))
    }

    /// Softmax over entries sharing a segment id. `logits` is `(E, 1)`;
    /// entry `e` belongs to segment `segments[e] < num_segments`. Each
    /// segment's maximum is subtracted before exponentiation. Empty
    /// segments simply have no entries; a singleton segment's entry
    /// becomes exactly one.
    pub fn segment_softmax(
        &mut self,
        logits: TensorId,
        segments: &[usize],
        num_segments: usize,
    ) -> Result<TensorId> {
        let (rows, cols) = self.shape(logits);
        if cols != 1 {
            return Err(Error::Shape {
                op: "segment_softmax",
                lhs: (rows, cols),
                rhs: (rows, 1),
            });
        }
        if segments.len() != rows {
            return Err(Error::Contract(format!(
                "segment_softmax: {} segment ids for {} entries",
                segments.len(),
                rows
            )));
        }
        if let Some(&bad) = segments.iter().find(|&&s| s >= num_segments) {
            return Err(Error::Contract(format!(
                "segment id {bad} >= num_segments {num_segments}"
            )));
        }
        let x = self.value(logits).data();
        let mut seg_max = vec![S::neg_infinity(); num_segments];
        for (e, &s) in segments.iter().enumerate() {
            seg_max[s] = seg_max[s].max(x[e]);
        }
        let mut exps = vec![S::zero(); rows];
        let mut seg_sum = vec![S::zero(); num_segments];
        for (e, &s) in segments.iter().enumerate() {
            exps[e] = (x[e] - seg_max[s]).exp();
            seg_sum[s] += exps[e];
        }
        for (e, &s) in segments.iter().enumerate() {
            exps[e] = exps[e] / seg_sum[s];
        }
        let value = Matrix::from_vec(rows, 1, exps)?;
        let needs = self.needs(logits);
        Ok(self.push(
            value,
            Op::SegmentSoftmax {
                logits,
                segments: segments.to_vec(),
                num_segments,
            },
            needs,
        ))
    }

    /// Row `s` of the output is the weight-scaled sum of the value rows in
    /// segment `s`: `out[s] = sum over e with segments[e]=s of w[e]*v[e]`.
    pub fn segment_weighted_sum(
        &mut self,
        values: TensorId,
        weights: TensorId,
        segments: &[usize],
        num_segments: usize,
    ) -> Result<TensorId> {
        let (ve, cols) = self.shape(values);
        let wshape = self.shape(weights);
        if wshape != (ve, 1) {
            return Err(Error::Shape {
                op: "segment_weighted_sum",
                lhs: (ve, cols),
                rhs: wshape,
            });
        }
        if segments.len() != ve {
            return Err(Error::Contract(format!(
                "segment_weighted_sum: {} segment ids for {} entries",
                segments.len(),
                ve
            )));
        }
        if let Some(&bad) = segments.iter().find(|&&s| s >= num_segments) {
            return Err(Error::Contract(format!(
                "segment id {bad} >= num_segments {num_segments}"
            )));
        }
        let mut value = Matrix::zeros(num_segments, cols);
        for (e, &s) in segments.iter().enumerate() {
            let w = self.value(weights)[(e, 0)];
            let vrow = self.value(values).row(e).to_vec();
            let orow = value.row_mut(s);
            for (o, v) in orow.iter_mut().zip(vrow) {
                *o += w * v;
            }
        }
        let needs = self.needs(values) || self.needs(weights);
        Ok(self.push(
            value,
            Op::SegmentWeightedSum {
                values,
                weights,
                segments: segments.to_vec(),
            },
            needs,
        ))
    }

    /// Numerically stable row-wise log-softmax.
    pub fn log_softmax_rows(&mut self, x: TensorId) -> TensorId {
        let (rows, cols) = self.shape(x);
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let row = self.value(x).row(i);
            let m = row.iter().copied().fold(S::neg_infinity(), S::max);
            let lse = row.iter().map(|&v| (v - m).exp()).sum::<S>().ln();
            let out = value.row_mut(i);
            for j in 0..cols {
                out[j] = self.nodes[x.0].value[(i, j)] - m - lse;
            }
        }
        let needs = self.needs(x);
        self.push(value, Op::LogSoftmaxRows(x), needs)
    }

    /// Inverted dropout: in training, each entry survives with probability
    /// `1 - p` and is scaled by `1 / (1 - p)`; in evaluation this is the
    /// identity and records nothing.
    pub fn dropout<R: Rng>(
        &mut self,
        x: TensorId,
        p: f64,
        rng: &mut R,
        train: bool,
    ) -> Result<TensorId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Contract(format!(
                "dropout rate must be in [0, 1), got {p}"
            )));
        }
        if !train || p == 0.0 {
            return Ok(x);
        }
        let keep_scale = S::cast(1.0 / (1.0 - p));
        let mask: Vec<S> = (0..self.value(x).data().len())
            .map(|_| {
                if rng.random::<f64>() < p {
                    S::zero()
                } else {
                    keep_scale
                }
            })
            .collect();
        let (rows, cols) = self.shape(x);
        let data: Vec<S> = self
            .value(x)
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let value = Matrix::from_vec(rows, cols, data)?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Dropout(x, mask), needs))
    }

    /// Single entry as a `(1, 1)` tensor.
    pub fn pick(&mut self, x: TensorId, row: usize, col: usize) -> Result<TensorId> {
        let (rows, cols) = self.shape(x);
        if row >= rows || col >= cols {
            return Err(Error::Contract(format!(
                "pick ({row}, {col}) out of range for {rows}x{cols}"
            )));
        }
        let value = Matrix::from_vec(1, 1, vec![self.value(x)[(row, col)]])?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Pick(x, row, col), needs))
    }

    /// Sum of all entries as a `(1, 1)` tensor.
    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let total = self.value(x).data().iter().copied().sum();
        let value = Matrix::from_vec(1, 1, vec![total]).unwrap();
        let needs = self.needs(x);
        self.push(value, Op::SumAll(x), needs)
    }

    /// Reverse sweep from a scalar loss. Populates `grad` for every node
    /// on a path from a `requires_grad` leaf to the loss; gradients from
    /// multiple consumers accumulate by addition.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Matrix<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, S::one()));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            self.propagate(id, &g, &mut grads)?;
            self.nodes[id].grad = Some(g);
        }
        Ok(())
    }

    fn propagate(
        &self,
        id: usize,
        g: &Matrix<S>,
        grads: &mut [Option<Matrix<S>>],
    ) -> Result<()> {
        let accumulate = |grads: &mut [Option<Matrix<S>>], t: TensorId, c: Matrix<S>| -> Result<()> {
            if !self.needs(t) {
                return Ok(());
            }
            match &mut grads[t.0] {
                Some(existing) => existing.add_scaled_assign(&c, S::one()),
                slot @ None => {
                    *slot = Some(c);
                    Ok(())
                }
            }
        };

        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, g.matmul(&bv.transpose())?)?;
                accumulate(grads, *b, av.transpose().matmul(g)?)?;
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone())?;
                accumulate(grads, *b, g.clone())?;
            }
            Op::Scale(x, c) => {
                accumulate(grads, *x, g.scale(*c))?;
            }
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, &v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    if v <= S::zero() {
                        *d *= *slope;
                    }
                }
                accumulate(grads, *x, dx)?;
            }
            Op::Elu(x) => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, &v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    if v <= S::zero() {
                        *d *= v.exp();
                    }
                }
                accumulate(grads, *x, dx)?;
            }
            Op::ConcatCols(inputs) => {
                let rows = g.rows();
                let mut offset = 0;
                for &t in inputs {
                    let c = self.value(t).cols();
                    let mut part = Matrix::zeros(rows, c);
                    for i in 0..rows {
                        part.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + c]);
                    }
                    accumulate(grads, t, part)?;
                    offset += c;
                }
            }
            Op::GatherRows(x, indices) => {
                let (rows, cols) = self.value(*x).shape();
                let mut dx = Matrix::zeros(rows, cols);
                for (new, &old) in indices.iter().enumerate() {
                    let grow = g.row(new).to_vec();
                    for (d, v) in dx.row_mut(old).iter_mut().zip(grow) {
                        *d += v;
                    }
                }
                accumulate(grads, *x, dx)?;
            }
            Op::MeanRows(x) => {
                let (rows, cols) = self.value(*x).shape();
                let inv = S::one() / S::from_usize(rows).unwrap();
                let mut dx = Matrix::zeros(rows, cols);
                for i in 0..rows {
                    for j in 0..cols {
                        dx[(i, j)] = g[(0, j)] * inv;
                    }
                }
                accumulate(grads, *x, dx)?;
            }
            Op::AddBias(x, bias) => {
                accumulate(grads, *x, g.clone())?;
                let cols = g.cols();
                let mut db = Matrix::zeros(1, cols);
                for i in 0..g.rows() {
                    for j in 0..cols {
                        db[(0, j)] += g[(i, j)];
                    }
                }
                accumulate(grads, *bias, db)?;
            }
            Op::SegmentSoftmax {
                logits,
                segments,
                num_segments,
            } => {
                // d e_k = alpha_k * (g_k - sum over segment of alpha_j g_j)
                let alpha = &self.nodes[id].value;
                let mut seg_dot = vec![S::zero(); *num_segments];
                for (e, &s) in segments.iter().enumerate() {
                    seg_dot[s] += alpha[(e, 0)] * g[(e, 0)];
                }
                let mut dx = Matrix::zeros(alpha.rows(), 1);
                for (e, &s) in segments.iter().enumerate() {
                    dx[(e, 0)] = alpha[(e, 0)] * (g[(e, 0)] - seg_dot[s]);
                }
                accumulate(grads, *logits, dx)?;
            }
            Op::SegmentWeightedSum {
                values,
                weights,
                segments,
            } => {
                let (ve, cols) = self.value(*values).shape();
                let mut dv = Matrix::zeros(ve, cols);
                let mut dw = Matrix::zeros(ve, 1);
                for (e, &s) in segments.iter().enumerate() {
                    let w = self.value(*weights)[(e, 0)];
                    let grow = g.row(s);
                    let vrow = self.value(*values).row(e);
                    let mut dot = S::zero();
                    for j in 0..cols {
                        dv[(e, j)] = w * grow[j];
                        dot += vrow[j] * grow[j];
                    }
                    dw[(e, 0)] = dot;
                }
                accumulate(grads, *values, dv)?;
                accumulate(grads, *weights, dw)?;
            }
            Op::LogSoftmaxRows(x) => {
                // dx = g - softmax(x) * rowsum(g), softmax(x) = exp(output)
                let out = &self.nodes[id].value;
                let (rows, cols) = out.shape();
                let mut dx = Matrix::zeros(rows, cols);
                for i in 0..rows {
                    let gsum: S = g.row(i).iter().copied().sum();
                    for j in 0..cols {
                        dx[(i, j)] = g[(i, j)] - out[(i, j)].exp() * gsum;
                    }
                }
                accumulate(grads, *x, dx)?;
            }
            Op::Dropout(x, mask) => {
                let mut dx = g.clone();
                for (d, &m) in dx.data_mut().iter_mut().zip(mask) {
                    *d *= m;
                }
                accumulate(grads, *x, dx)?;
            }
            Op::Pick(x, row, col) => {
                let (rows, cols) = self.value(*x).shape();
                let mut dx = Matrix::zeros(rows, cols);
                dx[(*row, *col)] = g[(0, 0)];
                accumulate(grads, *x, dx)?;
            }
            Op::SumAll(x) => {
                let (rows, cols) = self.value(*x).shape();
                accumulate(grads, *x, Matrix::filled(rows, cols, g[(0, 0)]))?;
            }
        }
        Ok(())
    }
}
