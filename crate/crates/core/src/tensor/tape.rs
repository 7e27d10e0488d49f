//! Gradient tape.
//!
//! Operations run eagerly and append a node per result. Node order is
//! creation order, which is a topological order by construction, so the
//! backward pass is a single reverse sweep. All matrices are row-major 2-D;
//! scalars are shape `[1]`.

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul {
        a: Var,
        b: Var,
    },
    Transpose {
        a: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    /// Broadcast-add a row vector to every row of a matrix.
    AddRow {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        a: Var,
        c: f64,
    },
    Sum {
        a: Var,
    },
    Pick {
        a: Var,
        index: usize,
    },
    SliceRows {
        a: Var,
        start: usize,
    },
    SliceCols {
        a: Var,
        start: usize,
    },
    ConcatRows {
        parts: Vec<Var>,
    },
    ConcatCols {
        parts: Vec<Var>,
    },
    SoftmaxRows {
        a: Var,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        /// Cached per-row 1/sqrt(var + eps).
        inv_std: Vec<f64>,
        /// Cached per-row mean.
        mean: Vec<f64>,
    },
    Gelu {
        a: Var,
    },
    Swish {
        a: Var,
    },
    BatchNormTrain {
        x: Var,
        gain: Var,
        bias: Var,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    BatchNormEval {
        x: Var,
        gain: Var,
        bias: Var,
        running_mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        /// w_{y_i} per sample.
        applied: Vec<f64>,
        weight_sum: f64,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    needs_grad: bool,
    op: Op,
}

/// Per-feature statistics produced by a training-mode batch norm.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Biased (divide-by-b) variance used for normalization.
    pub var: Vec<f64>,
    pub batch: usize,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn insert(&mut self, shape: Vec<usize>, data: Vec<f64>, needs_grad: bool, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node {
            shape,
            data,
            grad: None,
            needs_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Insert a tensor as a leaf; gradient tracking follows `requires_grad`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.insert(
            t.shape().to_vec(),
            t.data().to_vec(),
            t.requires_grad,
            Op::Leaf,
        )
    }

    /// Insert raw data as a non-tracked leaf.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.insert(shape, data, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        match self.nodes[v.0].shape[..] {
            [m, n] => Ok((m, n)),
            _ => Err(Error::ShapeMismatch {
                op,
                lhs: self.nodes[v.0].shape.clone(),
                rhs: vec![],
            }),
        }
    }

    // ── Operations ─────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let out = matmul_raw(&self.nodes[a.0].data, &self.nodes[b.0].data, m, k, n);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.insert(vec![m, n], out, needs, Op::Matmul { a, b }))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims2(a, "transpose")?;
        let src = &self.nodes[a.0].data;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        let needs = self.needs(a);
        Ok(self.insert(vec![n, m], out, needs, Op::Transpose { a }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let out: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.insert(shape, out, needs, Op::Add { a, b }))
    }

    /// `a[m×n] + b[n]`, adding `b` to every row.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims2(a, "add_row")?;
        if self.nodes[b.0].shape != [n] {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let bv = &self.nodes[b.0].data;
        let mut out = self.nodes[a.0].data.clone();
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] += bv[j];
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.insert(vec![m, n], out, needs, Op::AddRow { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::ShapeMismatch {
                op: "mul",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let out: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.insert(shape, out, needs, Op::Mul { a, b }))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x * c).collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a);
        self.insert(shape, out, needs, Op::Scale { a, c })
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.0].data.iter().sum();
        let needs = self.needs(a);
        self.insert(vec![1], vec![s], needs, Op::Sum { a })
    }

    /// Select one element by flat index, as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        if index >= self.nodes[a.0].data.len() {
            return Err(Error::InvalidConfig(format!(
                "pick index {} out of bounds for {} elements",
                index,
                self.nodes[a.0].data.len()
            )));
        }
        let v = self.nodes[a.0].data[index];
        let needs = self.needs(a);
        Ok(self.insert(vec![1], vec![v], needs, Op::Pick { a, index }))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, rows: usize) -> Result<Var> {
        let (m, n) = self.dims2(a, "slice_rows")?;
        if start + rows > m {
            return Err(Error::InvalidConfig(format!(
                "slice_rows {}..{} out of bounds for {} rows",
                start,
                start + rows,
                m
            )));
        }
        let out = self.nodes[a.0].data[start * n..(start + rows) * n].to_vec();
        let needs = self.needs(a);
        Ok(self.insert(vec![rows, n], out, needs, Op::SliceRows { a, start }))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, cols: usize) -> Result<Var> {
        let (m, n) = self.dims2(a, "slice_cols")?;
        if start + cols > n {
            return Err(Error::InvalidConfig(format!(
                "slice_cols {}..{} out of bounds for {} cols",
                start,
                start + cols,
                n
            )));
        }
        let src = &self.nodes[a.0].data;
        let mut out = vec![0.0; m * cols];
        for i in 0..m {
            out[i * cols..(i + 1) * cols]
                .copy_from_slice(&src[i * n + start..i * n + start + cols]);
        }
        let needs = self.needs(a);
        Ok(self.insert(vec![m, cols], out, needs, Op::SliceCols { a, start }))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty());
        let (_, n) = self.dims2(parts[0], "concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        let mut needs = false;
        for &p in parts {
            let (m, pn) = self.dims2(p, "concat_rows")?;
            if pn != n {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.nodes[parts[0].0].shape.clone(),
                    rhs: self.nodes[p.0].shape.clone(),
                });
            }
            rows += m;
            out.extend_from_slice(&self.nodes[p.0].data);
            needs |= self.needs(p);
        }
        Ok(self.insert(
            vec![rows, n],
            out,
            needs,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty());
        let (m, _) = self.dims2(parts[0], "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        let mut needs = false;
        for &p in parts {
            let (pm, pn) = self.dims2(p, "concat_cols")?;
            if pm != m {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.nodes[parts[0].0].shape.clone(),
                    rhs: self.nodes[p.0].shape.clone(),
                });
            }
            widths.push(pn);
            needs |= self.needs(p);
        }
        let n: usize = widths.iter().sum();
        let mut out = vec![0.0; m * n];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = &self.nodes[p.0].data;
            for i in 0..m {
                out[i * n + offset..i * n + offset + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        Ok(self.insert(
            vec![m, n],
            out,
            needs,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Row-wise softmax, stabilized by subtracting the row max.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims2(a, "softmax_rows")?;
        if self.nodes[a.0].data.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite {
                op: "softmax_rows",
            });
        }
        let src = &self.nodes[a.0].data;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..n {
                let e = (row[j] - max).exp();
                out[i * n + j] = e;
                sum += e;
            }
            for j in 0..n {
                out[i * n + j] /= sum;
            }
        }
        let needs = self.needs(a);
        Ok(self.insert(vec![m, n], out, needs, Op::SoftmaxRows { a }))
    }

    /// Per-row normalization to zero mean and unit variance, then affine
    /// gain/bias. `x[m×d]`, `gain[d]`, `bias[d]`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (m, d) = self.dims2(x, "layer_norm")?;
        if self.nodes[gain.0].shape != [d] || self.nodes[bias.0].shape != [d] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: self.nodes[x.0].shape.clone(),
                rhs: self.nodes[gain.0].shape.clone(),
            });
        }
        let src = &self.nodes[x.0].data;
        let g = &self.nodes[gain.0].data;
        let b = &self.nodes[bias.0].data;
        let mut out = vec![0.0; m * d];
        let mut means = vec![0.0; m];
        let mut inv_stds = vec![0.0; m];
        for i in 0..m {
            let row = &src[i * d..(i + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            means[i] = mean;
            inv_stds[i] = inv_std;
            for j in 0..d {
                out[i * d + j] = (row[j] - mean) * inv_std * g[j] + b[j];
            }
        }
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.insert(
            vec![m, d],
            out,
            needs,
            Op::LayerNorm {
                x,
                gain,
                bias,
                inv_std: inv_stds,
                mean: means,
            },
        ))
    }

    /// GELU with the tanh approximation:
    /// `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out: Vec<f64> = self.nodes[a.0].data.iter().map(|&x| gelu_scalar(x)).collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a);
        self.insert(shape, out, needs, Op::Gelu { a })
    }

    /// `x · sigmoid(x)`.
    pub fn swish(&mut self, a: Var) -> Var {
        let out: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .map(|&x| x * sigmoid(x))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a);
        self.insert(shape, out, needs, Op::Swish { a })
    }

    /// Training-mode batch norm over `x[b×d]`. Normalizes each feature with
    /// the batch statistics and returns them so the caller can update
    /// running averages.
    pub fn batch_norm_train(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats)> {
        let (b, d) = self.dims2(x, "batch_norm")?;
        if b < 2 {
            return Err(Error::BatchTooSmall { batch: b });
        }
        let src = &self.nodes[x.0].data;
        let g = &self.nodes[gain.0].data;
        let be = &self.nodes[bias.0].data;
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        for i in 0..b {
            for j in 0..d {
                mean[j] += src[i * d + j];
            }
        }
        for m in &mut mean {
            *m /= b as f64;
        }
        for i in 0..b {
            for j in 0..d {
                let c = src[i * d + j] - mean[j];
                var[j] += c * c;
            }
        }
        for v in &mut var {
            *v /= b as f64;
        }
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
        let mut out = vec![0.0; b * d];
        for i in 0..b {
            for j in 0..d {
                out[i * d + j] = (src[i * d + j] - mean[j]) * inv_std[j] * g[j] + be[j];
            }
        }
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        let stats = BatchStats {
            mean: mean.clone(),
            var: var.clone(),
            batch: b,
        };
        let v = self.insert(
            vec![b, d],
            out,
            needs,
            Op::BatchNormTrain {
                x,
                gain,
                bias,
                mean,
                inv_std,
            },
        );
        Ok((v, stats))
    }

    /// Eval-mode batch norm using fixed running statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        running_mean: &[f64],
        running_var: &[f64],
        eps: f64,
    ) -> Result<Var> {
        let (b, d) = self.dims2(x, "batch_norm")?;
        if running_mean.len() != d || running_var.len() != d {
            return Err(Error::ShapeMismatch {
                op: "batch_norm",
                lhs: vec![b, d],
                rhs: vec![running_mean.len()],
            });
        }
        let inv_std: Vec<f64> = running_var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
        let src = &self.nodes[x.0].data;
        let g = &self.nodes[gain.0].data;
        let be = &self.nodes[bias.0].data;
        let mut out = vec![0.0; b * d];
        for i in 0..b {
            for j in 0..d {
                out[i * d + j] = (src[i * d + j] - running_mean[j]) * inv_std[j] * g[j] + be[j];
            }
        }
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.insert(
            vec![b, d],
            out,
            needs,
            Op::BatchNormEval {
                x,
                gain,
                bias,
                running_mean: running_mean.to_vec(),
                inv_std,
            },
        ))
    }

    /// Class-weighted cross entropy over `logits[b×C]`, normalized by the sum
    /// of the applied weights so the loss scale does not depend on the batch
    /// class mix. Returns a scalar.
    pub fn cross_entropy_weighted(
        &mut self,
        logits: Var,
        labels: &[usize],
        class_weights: &[f64],
    ) -> Result<Var> {
        let (b, c) = self.dims2(logits, "cross_entropy")?;
        if labels.len() != b {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                lhs: vec![b, c],
                rhs: vec![labels.len()],
            });
        }
        if class_weights.len() != c {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                lhs: vec![b, c],
                rhs: vec![class_weights.len()],
            });
        }
        for &y in labels {
            if y >= c {
                return Err(Error::LabelOutOfRange {
                    label: y,
                    classes: c,
                });
            }
        }
        let src = &self.nodes[logits.0].data;
        let mut probs = vec![0.0; b * c];
        let mut loss = 0.0;
        let mut applied = Vec::with_capacity(b);
        for i in 0..b {
            let row = &src[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let w = class_weights[labels[i]];
            applied.push(w);
            for j in 0..c {
                let log_p = row[j] - max - log_sum;
                probs[i * c + j] = log_p.exp();
                if j == labels[i] {
                    loss -= w * log_p;
                }
            }
        }
        let weight_sum: f64 = applied.iter().sum();
        loss /= weight_sum;
        let needs = self.needs(logits);
        Ok(self.insert(
            vec![1],
            vec![loss],
            needs,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                applied,
                weight_sum,
                probs,
            },
        ))
    }

    // ── Backward ───────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Populates gradients for every node
    /// on a path between the loss and a gradient-tracked leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(Error::NonScalarLoss {
                shape: self.nodes[loss.0].shape.clone(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        for (node, grad) in self.nodes.iter_mut().zip(grads) {
            node.grad = grad;
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[1];
                let ad = &self.nodes[a.0].data;
                let bd = &self.nodes[b.0].data;
                if self.needs(*a) {
                    let da = acc(grads, *a, m * k);
                    for r in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += g[r * n + j] * bd[p * n + j];
                            }
                            da[r * k + p] += s;
                        }
                    }
                }
                if self.needs(*b) {
                    let db = acc(grads, *b, k * n);
                    for r in 0..m {
                        for p in 0..k {
                            let a_rp = ad[r * k + p];
                            for j in 0..n {
                                db[p * n + j] += a_rp * g[r * n + j];
                            }
                        }
                    }
                }
            }
            Op::Transpose { a } => {
                let (m, n) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                if self.needs(*a) {
                    let da = acc(grads, *a, m * n);
                    for r in 0..m {
                        for j in 0..n {
                            da[r * n + j] += g[j * m + r];
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [a, b] {
                    if self.needs(*v) {
                        let dv = acc(grads, *v, g.len());
                        for (d, gi) in dv.iter_mut().zip(g) {
                            *d += gi;
                        }
                    }
                }
            }
            Op::AddRow { a, b } => {
                let n = self.nodes[b.0].data.len();
                if self.needs(*a) {
                    let da = acc(grads, *a, g.len());
                    for (d, gi) in da.iter_mut().zip(g) {
                        *d += gi;
                    }
                }
                if self.needs(*b) {
                    let db = acc(grads, *b, n);
                    for (idx, gi) in g.iter().enumerate() {
                        db[idx % n] += gi;
                    }
                }
            }
            Op::Mul { a, b } => {
                if self.needs(*a) {
                    let bd = &self.nodes[b.0].data;
                    let da = acc(grads, *a, g.len());
                    for ((d, gi), bv) in da.iter_mut().zip(g).zip(bd) {
                        *d += gi * bv;
                    }
                }
                if self.needs(*b) {
                    let ad = &self.nodes[a.0].data;
                    let db = acc(grads, *b, g.len());
                    for ((d, gi), av) in db.iter_mut().zip(g).zip(ad) {
                        *d += gi * av;
                    }
                }
            }
            Op::Scale { a, c } => {
                if self.needs(*a) {
                    let da = acc(grads, *a, g.len());
                    for (d, gi) in da.iter_mut().zip(g) {
                        *d += gi * c;
                    }
                }
            }
            Op::Sum { a } => {
                if self.needs(*a) {
                    let len = self.nodes[a.0].data.len();
                    let da = acc(grads, *a, len);
                    for d in da.iter_mut() {
                        *d += g[0];
                    }
                }
            }
            Op::Pick { a, index } => {
                if self.needs(*a) {
                    let len = self.nodes[a.0].data.len();
                    let da = acc(grads, *a, len);
                    da[*index] += g[0];
                }
            }
            Op::SliceRows { a, start } => {
                if self.needs(*a) {
                    let n = self.nodes[a.0].shape[1];
                    let len = self.nodes[a.0].data.len();
                    let da = acc(grads, *a, len);
                    for (idx, gi) in g.iter().enumerate() {
                        da[start * n + idx] += gi;
                    }
                }
            }
            Op::SliceCols { a, start } => {
                if self.needs(*a) {
                    let n = self.nodes[a.0].shape[1];
                    let cols = self.nodes[i].shape[1];
                    let rows = self.nodes[i].shape[0];
                    let len = self.nodes[a.0].data.len();
                    let da = acc(grads, *a, len);
                    for r in 0..rows {
                        for j in 0..cols {
                            da[r * n + start + j] += g[r * cols + j];
                        }
                    }
                }
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p.0].data.len();
                    if self.needs(p) {
                        let dp = acc(grads, p, len);
                        for (d, gi) in dp.iter_mut().zip(&g[offset..offset + len]) {
                            *d += gi;
                        }
                    }
                    offset += len;
                }
            }
            Op::ConcatCols { parts } => {
                let m = self.nodes[i].shape[0];
                let n = self.nodes[i].shape[1];
                let mut offset = 0;
                for &p in parts {
                    let w = self.nodes[p.0].shape[1];
                    if self.needs(p) {
                        let dp = acc(grads, p, m * w);
                        for r in 0..m {
                            for j in 0..w {
                                dp[r * w + j] += g[r * n + offset + j];
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::SoftmaxRows { a } => {
                if self.needs(*a) {
                    let (m, n) = (self.nodes[i].shape[0], self.nodes[i].shape[1]);
                    let y = &self.nodes[i].data;
                    let len = m * n;
                    let da = acc(grads, *a, len);
                    for r in 0..m {
                        let mut dot = 0.0;
                        for j in 0..n {
                            dot += g[r * n + j] * y[r * n + j];
                        }
                        for j in 0..n {
                            da[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                inv_std,
                mean,
            } => {
                let (m, d) = (self.nodes[i].shape[0], self.nodes[i].shape[1]);
                let xd = &self.nodes[x.0].data;
                let gd = &self.nodes[gain.0].data;
                for r in 0..m {
                    let s = inv_std[r];
                    let mu = mean[r];
                    let mut sum1 = 0.0;
                    let mut sum2 = 0.0;
                    for j in 0..d {
                        let xhat = (xd[r * d + j] - mu) * s;
                        let dxhat = g[r * d + j] * gd[j];
                        sum1 += dxhat;
                        sum2 += dxhat * xhat;
                    }
                    if self.needs(*x) {
                        let dx = acc(grads, *x, m * d);
                        for j in 0..d {
                            let xhat = (xd[r * d + j] - mu) * s;
                            let dxhat = g[r * d + j] * gd[j];
                            dx[r * d + j] +=
                                s * (dxhat - sum1 / d as f64 - xhat * sum2 / d as f64);
                        }
                    }
                    if self.needs(*gain) {
                        let dg = acc(grads, *gain, d);
                        for j in 0..d {
                            let xhat = (xd[r * d + j] - mu) * s;
                            dg[j] += g[r * d + j] * xhat;
                        }
                    }
                    if self.needs(*bias) {
                        let db = acc(grads, *bias, d);
                        for j in 0..d {
                            db[j] += g[r * d + j];
                        }
                    }
                }
            }
            Op::Gelu { a } => {
                if self.needs(*a) {
                    let xd = &self.nodes[a.0].data;
                    let da = acc(grads, *a, g.len());
                    for ((d, gi), &x) in da.iter_mut().zip(g).zip(xd) {
                        *d += gi * gelu_grad_scalar(x);
                    }
                }
            }
            Op::Swish { a } => {
                if self.needs(*a) {
                    let xd = &self.nodes[a.0].data;
                    let da = acc(grads, *a, g.len());
                    for ((d, gi), &x) in da.iter_mut().zip(g).zip(xd) {
                        let s = sigmoid(x);
                        *d += gi * s * (1.0 + x * (1.0 - s));
                    }
                }
            }
            Op::BatchNormTrain {
                x,
                gain,
                bias,
                mean,
                inv_std,
            } => {
                let (b, d) = (self.nodes[i].shape[0], self.nodes[i].shape[1]);
                let xd = &self.nodes[x.0].data;
                let gd = &self.nodes[gain.0].data;
                for j in 0..d {
                    let s = inv_std[j];
                    let mu = mean[j];
                    let mut sum1 = 0.0;
                    let mut sum2 = 0.0;
                    for r in 0..b {
                        let xhat = (xd[r * d + j] - mu) * s;
                        let dxhat = g[r * d + j] * gd[j];
                        sum1 += dxhat;
                        sum2 += dxhat * xhat;
                    }
                    if self.needs(*x) {
                        let dx = acc(grads, *x, b * d);
                        for r in 0..b {
                            let xhat = (xd[r * d + j] - mu) * s;
                            let dxhat = g[r * d + j] * gd[j];
                            dx[r * d + j] +=
                                s * (dxhat - sum1 / b as f64 - xhat * sum2 / b as f64);
                        }
                    }
                    if self.needs(*gain) {
                        let dg = acc(grads, *gain, d);
                        for r in 0..b {
                            let xhat = (xd[r * d + j] - mu) * s;
                            dg[j] += g[r * d + j] * xhat;
                        }
                    }
                    if self.needs(*bias) {
                        let db = acc(grads, *bias, d);
                        for r in 0..b {
                            db[j] += g[r * d + j];
                        }
                    }
                }
            }
            Op::BatchNormEval {
                x,
                gain,
                bias,
                running_mean,
                inv_std,
            } => {
                let (b, d) = (self.nodes[i].shape[0], self.nodes[i].shape[1]);
                let xd = &self.nodes[x.0].data;
                let gd = &self.nodes[gain.0].data;
                if self.needs(*x) {
                    let dx = acc(grads, *x, b * d);
                    for r in 0..b {
                        for j in 0..d {
                            dx[r * d + j] += g[r * d + j] * gd[j] * inv_std[j];
                        }
                    }
                }
                if self.needs(*gain) {
                    let dg = acc(grads, *gain, d);
                    for r in 0..b {
                        for j in 0..d {
                            let xhat = (xd[r * d + j] - running_mean[j]) * inv_std[j];
                            dg[j] += g[r * d + j] * xhat;
                        }
                    }
                }
                if self.needs(*bias) {
                    let db = acc(grads, *bias, d);
                    for r in 0..b {
                        for j in 0..d {
                            db[j] += g[r * d + j];
                        }
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                labels,
                applied,
                weight_sum,
                probs,
            } => {
                if self.needs(*logits) {
                    let b = labels.len();
                    let c = self.nodes[logits.0].shape[1];
                    let dl = acc(grads, *logits, b * c);
                    for r in 0..b {
                        let w = applied[r] / weight_sum;
                        for j in 0..c {
                            let indicator = if j == labels[r] { 1.0 } else { 0.0 };
                            dl[r * c + j] += g[0] * w * (probs[r * c + j] - indicator);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn leaf(tape: &mut Tape, shape: Vec<usize>, data: Vec<f64>) -> Var {
        let t = Tensor::new(shape, data).unwrap().requires_grad(true);
        tape.leaf(&t)
    }

    #[test]
    fn matmul_identity_case() {
        let mut tape = Tape::new();
        let eye = leaf(&mut tape, vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let x = leaf(&mut tape, vec![2, 3], vec![5.0, -1.0, 2.0, 0.5, 3.0, 7.0]);
        let y = tape.matmul(eye, x).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn matmul_hand_example() {
        let mut tape = Tape::new();
        let a = leaf(&mut tape, vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = leaf(&mut tape, vec![2, 1], vec![0.0, 1.0]);
        let y = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(y), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = leaf(&mut tape, vec![2, 3], vec![0.0; 6]);
        let b = leaf(&mut tape, vec![2, 2], vec![0.0; 4]);
        match tape.matmul(a, b) {
            Err(Error::ShapeMismatch { op, lhs, rhs }) => {
                assert_eq!(op, "matmul");
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 2]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn matmul_grad_of_sum_is_ones_times_b_transpose() {
        let mut tape = Tape::new();
        let a = leaf(&mut tape, vec![2, 3], vec![0.3, -0.2, 0.9, 1.5, 0.0, -1.1]);
        let b_data = vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.25];
        let b = leaf(&mut tape, vec![3, 2], b_data.clone());
        let y = tape.matmul(a, b).unwrap();
        let loss = tape.sum(y);
        tape.backward(loss).unwrap();
        let ga = tape.grad(a).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                let expected = b_data[c * 2] + b_data[c * 2 + 1];
                assert!((ga[r * 3 + c] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_examples() {
        let mut tape = Tape::new();
        let single = leaf(&mut tape, vec![1, 1], vec![3.7]);
        let y = tape.softmax_rows(single).unwrap();
        assert_eq!(tape.value(y), &[1.0]);

        let equal = leaf(&mut tape, vec![1, 4], vec![0.3; 4]);
        let y = tape.softmax_rows(equal).unwrap();
        for v in tape.value(y) {
            assert!((v - 0.25).abs() < 1e-15);
        }

        // exp(0) = 1 against exp(ln 3) = 3.
        let pair = leaf(&mut tape, vec![1, 2], vec![0.0, 3.0f64.ln()]);
        let y = tape.softmax_rows(pair).unwrap();
        assert!((tape.value(y)[0] - 0.25).abs() < 1e-12);
        assert!((tape.value(y)[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant() {
        let mut rng = crate::rng::seeded(21);
        use rand::Rng;
        for _ in 0..20 {
            let mut tape = Tape::new();
            let data: Vec<f64> = (0..12).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let shifted: Vec<f64> = data.iter().map(|v| v + 123.456).collect();
            let a = leaf(&mut tape, vec![3, 4], data);
            let b = leaf(&mut tape, vec![3, 4], shifted);
            let ya = tape.softmax_rows(a).unwrap();
            let yb = tape.softmax_rows(b).unwrap();
            for r in 0..3 {
                let sum: f64 = tape.value(ya)[r * 4..(r + 1) * 4].iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
            for (x, y) in tape.value(ya).iter().zip(tape.value(yb)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rejects_nan() {
        let mut tape = Tape::new();
        let a = leaf(&mut tape, vec![1, 2], vec![f64::NAN, 0.0]);
        assert!(matches!(
            tape.softmax_rows(a),
            Err(Error::NonFinite { op: "softmax_rows" })
        ));
    }

    #[test]
    fn layer_norm_constant_vector_is_zero() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![1, 5], vec![4.2; 5]);
        let gain = leaf(&mut tape, vec![5], vec![1.0; 5]);
        let bias = leaf(&mut tape, vec![5], vec![0.0; 5]);
        let y = tape.layer_norm(x, gain, bias, 1e-5).unwrap();
        for v in tape.value(y) {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn layer_norm_zero_gain_yields_bias() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2, 3], vec![1.0, -2.0, 0.5, 9.0, 3.0, 0.0]);
        let gain = leaf(&mut tape, vec![3], vec![0.0; 3]);
        let bias = leaf(&mut tape, vec![3], vec![0.7, -0.3, 0.1]);
        let y = tape.layer_norm(x, gain, bias, 1e-5).unwrap();
        assert_eq!(tape.value(y), &[0.7, -0.3, 0.1, 0.7, -0.3, 0.1]);
    }

    #[test]
    fn layer_norm_statistics_and_shift_invariance() {
        let mut rng = crate::rng::seeded(3);
        use rand::Rng;
        let data: Vec<f64> = (0..8).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let shifted: Vec<f64> = data.iter().map(|v| v + 17.5).collect();
        let mut tape = Tape::new();
        let gain = leaf(&mut tape, vec![8], vec![1.0; 8]);
        let bias = leaf(&mut tape, vec![8], vec![0.0; 8]);
        let x = leaf(&mut tape, vec![1, 8], data);
        let xs = leaf(&mut tape, vec![1, 8], shifted);
        let y = tape.layer_norm(x, gain, bias, 1e-5).unwrap();
        let ys = tape.layer_norm(xs, gain, bias, 1e-5).unwrap();
        let out = tape.value(y);
        let mean: f64 = out.iter().sum::<f64>() / 8.0;
        let var: f64 = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-6);
        for (a, b) in out.iter().zip(tape.value(ys)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gelu_and_swish_values() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![1, 3], vec![0.0, 1.0, 20.0]);
        let g = tape.gelu(x);
        let s = tape.swish(x);
        assert_eq!(tape.value(g)[0], 0.0);
        assert_eq!(tape.value(s)[0], 0.0);
        // Scalar evaluation of the tanh-approximation formula.
        let c = (2.0 / std::f64::consts::PI).sqrt();
        let expected = 0.5 * (1.0 + (c * (1.0 + 0.044715)).tanh());
        assert!((tape.value(g)[1] - expected).abs() < 1e-15);
        assert!((tape.value(s)[2] - 20.0).abs() < 1e-6);
    }

    #[test]
    fn batch_norm_eval_identity_with_unit_stats() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2, 3], vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.0]);
        let gain = leaf(&mut tape, vec![3], vec![1.0; 3]);
        let bias = leaf(&mut tape, vec![3], vec![0.0; 3]);
        let y = tape
            .batch_norm_eval(x, gain, bias, &[0.0; 3], &[1.0; 3], 0.0)
            .unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn batch_norm_train_zeroes_constant_columns() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![4, 2], vec![7.0, 1.0, 7.0, 2.0, 7.0, 3.0, 7.0, 4.0]);
        let gain = leaf(&mut tape, vec![2], vec![1.0; 2]);
        let bias = leaf(&mut tape, vec![2], vec![0.0; 2]);
        let (y, stats) = tape.batch_norm_train(x, gain, bias, 1e-5).unwrap();
        for r in 0..4 {
            assert!(tape.value(y)[r * 2].abs() < 1e-9);
        }
        assert_eq!(stats.mean[0], 7.0);
        assert_eq!(stats.var[0], 0.0);
    }

    #[test]
    fn batch_norm_train_centers_each_feature() {
        let mut rng = crate::rng::seeded(9);
        use rand::Rng;
        let data: Vec<f64> = (0..64).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![16, 4], data);
        let gain = leaf(&mut tape, vec![4], vec![1.0; 4]);
        let bias = leaf(&mut tape, vec![4], vec![0.0; 4]);
        let (y, _) = tape.batch_norm_train(x, gain, bias, 1e-5).unwrap();
        for j in 0..4 {
            let mean: f64 = (0..16).map(|r| tape.value(y)[r * 4 + j]).sum::<f64>() / 16.0;
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn batch_norm_train_rejects_batch_of_one() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![1, 3], vec![0.0; 3]);
        let gain = leaf(&mut tape, vec![3], vec![1.0; 3]);
        let bias = leaf(&mut tape, vec![3], vec![0.0; 3]);
        assert!(matches!(
            tape.batch_norm_train(x, gain, bias, 1e-5),
            Err(Error::BatchTooSmall { batch: 1 })
        ));
    }

    #[test]
    fn cross_entropy_examples() {
        // Aligned one-hot logits with a huge margin.
        let mut tape = Tape::new();
        let logits = leaf(
            &mut tape,
            vec![2, 3],
            vec![50.0, 0.0, 0.0, 0.0, 50.0, 0.0],
        );
        let loss = tape
            .cross_entropy_weighted(logits, &[0, 1], &[1.0; 3])
            .unwrap();
        assert!(tape.value(loss)[0] < 1e-6);

        // Uniform logits over four classes.
        let mut tape = Tape::new();
        let logits = leaf(&mut tape, vec![2, 4], vec![0.25; 8]);
        let loss = tape
            .cross_entropy_weighted(logits, &[3, 1], &[1.0; 4])
            .unwrap();
        assert!((tape.value(loss)[0] - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_matches_scalar_brute_force() {
        let logits = vec![1.2, -0.3, 0.8, 0.1, -1.0, 2.2];
        let labels = [1usize, 0, 1];
        let weights = [1.0, 2.0];
        let mut tape = Tape::new();
        let l = leaf(&mut tape, vec![3, 2], logits.clone());
        let loss = tape.cross_entropy_weighted(l, &labels, &weights).unwrap();
        // Independent scalar computation.
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = &logits[i * 2..(i + 1) * 2];
            let z = (row[0].exp() + row[1].exp()).ln();
            num += weights[y] * (z - row[y]);
            den += weights[y];
        }
        assert!((tape.value(loss)[0] - num / den).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let mut tape = Tape::new();
        let l = leaf(&mut tape, vec![1, 2], vec![0.0, 0.0]);
        assert!(matches!(
            tape.cross_entropy_weighted(l, &[2], &[1.0, 1.0]),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn backward_sum_gives_ones_and_square_gives_two_x() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2, 2], vec![1.5, -2.0, 0.25, 4.0]);
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0; 4]);

        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![1, 3], vec![1.5, -2.0, 0.25]);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[3.0, -4.0, 0.5]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2, 2], vec![0.0; 4]);
        assert!(matches!(
            tape.backward(x),
            Err(Error::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn replay_is_bitwise_deterministic() {
        let run = || {
            let mut tape = Tape::new();
            let x = leaf(&mut tape, vec![2, 3], vec![0.9, -0.4, 0.3, 1.7, -2.2, 0.05]);
            let w = leaf(&mut tape, vec![3, 2], vec![0.2, -0.6, 1.1, 0.4, -0.9, 0.7]);
            let gain = leaf(&mut tape, vec![2], vec![1.2, 0.8]);
            let bias = leaf(&mut tape, vec![2], vec![0.1, -0.1]);
            let y = tape.matmul(x, w).unwrap();
            let y = tape.layer_norm(y, gain, bias, 1e-5).unwrap();
            let y = tape.gelu(y);
            let y = tape.softmax_rows(y).unwrap();
            let loss = tape.cross_entropy_weighted(y, &[0, 1], &[1.0, 1.0]).unwrap();
            tape.backward(loss).unwrap();
            (
                tape.grad(x).unwrap().to_vec(),
                tape.grad(w).unwrap().to_vec(),
            )
        };
        let (gx1, gw1) = run();
        let (gx2, gw2) = run();
        for (a, b) in gx1.iter().zip(&gx2).chain(gw1.iter().zip(&gw2)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn slicing_and_concat_round_trip() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![3, 4], (0..12).map(|v| v as f64).collect());
        let left = tape.slice_cols(x, 0, 2).unwrap();
        let right = tape.slice_cols(x, 2, 2).unwrap();
        let back = tape.concat_cols(&[left, right]).unwrap();
        assert_eq!(tape.value(back), tape.value(x));
        let top = tape.slice_rows(x, 0, 1).unwrap();
        let bottom = tape.slice_rows(x, 1, 2).unwrap();
        let back = tape.concat_rows(&[top, bottom]).unwrap();
        assert_eq!(tape.value(back), tape.value(x));
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let a_ip = a[i * k + p];
            let row = &b[p * n..(p + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                dst[j] += a_ip * row[j];
            }
        }
    }
    out
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn gelu_scalar(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let t = (c * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
}
