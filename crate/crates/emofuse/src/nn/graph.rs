//! Reverse-mode automatic differentiation on a flat tape.
//!
//! A [`Graph`] records one forward pass as an append-only list of nodes, so
//! reverse insertion order is already a reverse topological order. Every
//! value is a dense row-major `f64` buffer. [`Tensor`] is a cheap handle
//! (graph pointer + node id); calling [`Tensor::backward`] on a scalar fills
//! the `grad` buffer of every node that requires gradients.
//!
//! Shapes are 1-D (`[d]`) or 2-D (`[rows, cols]`); sequence data is stored
//! with one position per row. Shape mismatches are contract violations and
//! panic.

use std::cell::RefCell;
use std::rc::Rc;

/// One recorded operation. Parent node ids always precede the node itself.
#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MatMul(usize, usize),
    Transpose(usize),
    SoftmaxRows(usize),
    Gelu(usize),
    LayerNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        eps: f64,
    },
    /// Row k of the output is row k of `x` times the scalar `w*scores[k] + b`.
    ScaleRowsAffine {
        x: usize,
        w: usize,
        b: usize,
        scores: Rc<Vec<f64>>,
    },
    AddRowBias {
        x: usize,
        bias: usize,
    },
    ConcatRows(usize, usize),
    ConcatCols(usize, usize),
    SliceRows {
        x: usize,
        start: usize,
        end: usize,
    },
    GatherRows {
        table: usize,
        indices: Rc<Vec<usize>>,
    },
    MeanRows(usize),
    SumAll(usize),
    /// Numerically stable `logsumexp(logits) - logits[target]`.
    CrossEntropy {
        logits: usize,
        target: usize,
    },
}

struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

/// Tape for one forward (and optional backward) pass.
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Graph`].
#[derive(Clone)]
pub struct Tensor {
    graph: Rc<Graph>,
    id: usize,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn rows_cols(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (1, *n),
        [n, d] => (*n, *d),
        other => panic!("expected 1-D or 2-D tensor, got shape {:?}", other),
    }
}

impl Graph {
    pub fn new() -> Rc<Graph> {
        Rc::new(Graph {
            nodes: RefCell::new(Vec::new()),
        })
    }

    pub fn len(self: &Rc<Self>) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(self: &Rc<Self>) -> bool {
        self.len() == 0
    }

    /// Insert a leaf node. Parameters set `requires_grad`; constants do not.
    pub fn leaf(self: &Rc<Self>, shape: &[usize], data: Vec<f64>, requires_grad: bool) -> Tensor {
        assert_eq!(
            numel(shape),
            data.len(),
            "leaf data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        self.push(shape.to_vec(), data, requires_grad, Op::Leaf)
    }

    pub fn constant(self: &Rc<Self>, shape: &[usize], data: Vec<f64>) -> Tensor {
        self.leaf(shape, data, false)
    }

    fn push(self: &Rc<Self>, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool, op: Op) -> Tensor {
        debug_assert!(value.iter().all(|v| v.is_finite()), "non-finite forward value");
        let grad = if requires_grad {
            vec![0.0; value.len()]
        } else {
            Vec::new()
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            shape,
            value,
            grad,
            requires_grad,
            op,
        });
        Tensor {
            graph: Rc::clone(self),
            id: nodes.len() - 1,
        }
    }
}

impl Tensor {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].shape.clone()
    }

    pub fn numel(&self) -> usize {
        numel(&self.graph.nodes.borrow()[self.id].shape)
    }

    /// (rows, cols), treating a 1-D tensor as a single row.
    pub fn dims2(&self) -> (usize, usize) {
        rows_cols(&self.graph.nodes.borrow()[self.id].shape)
    }

    pub fn value(&self) -> Vec<f64> {
        self.graph.nodes.borrow()[self.id].value.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    /// Accumulated gradient; zeros until [`Tensor::backward`] has run on a
    /// scalar downstream of this node.
    pub fn grad(&self) -> Vec<f64> {
        let nodes = self.graph.nodes.borrow();
        let node = &nodes[self.id];
        if node.requires_grad {
            node.grad.clone()
        } else {
            vec![0.0; node.value.len()]
        }
    }

    fn same_graph(&self, other: &Tensor) {
        assert!(
            Rc::ptr_eq(&self.graph, &other.graph),
            "tensors belong to different graphs"
        );
    }

    fn binary_same_shape(&self, other: &Tensor, make: impl FnOnce(usize, usize) -> Op, f: impl Fn(f64, f64) -> f64) -> Tensor {
        self.same_graph(other);
        let nodes = self.graph.nodes.borrow();
        let (a, b) = (&nodes[self.id], &nodes[other.id]);
        assert_eq!(a.shape, b.shape, "shape mismatch in elementwise op");
        let value: Vec<f64> = a.value.iter().zip(&b.value).map(|(x, y)| f(*x, *y)).collect();
        let rg = a.requires_grad || b.requires_grad;
        let shape = a.shape.clone();
        drop(nodes);
        self.graph.push(shape, value, rg, make(self.id, other.id))
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.binary_same_shape(other, Op::Add, |x, y| x + y)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.binary_same_shape(other, Op::Sub, |x, y| x - y)
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.binary_same_shape(other, Op::Mul, |x, y| x * y)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.id];
        let value: Vec<f64> = a.value.iter().map(|x| x * c).collect();
        let (shape, rg) = (a.shape.clone(), a.requires_grad);
        drop(nodes);
        self.graph.push(shape, value, rg, Op::Scale(self.id, c))
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        self.same_graph(other);
        let nodes = self.graph.nodes.borrow();
        let (a, b) = (&nodes[self.id], &nodes[other.id]);
        let (n, m) = rows_cols(&a.shape);
        let (m2, p) = rows_cols(&b.shape);
        assert_eq!(m, m2, "matmul inner dimension mismatch: {}x{} @ {}x{}", n, m, m2, p);
        let value = matmul(&a.value, &b.value, n, m, p);
        let rg = a.requires_grad || b.requires_grad;
        drop(nodes);
        self.graph.push(vec![n, p], value, rg, Op::MatMul(self.id, other.id))
    }

    pub fn transpose(&self) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.id];
        let (n, m) = rows_cols(&a.shape);
        let mut value = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                value[j * n + i] = a.value[i * m + j];
            }
        }
        let rg = a.requires_grad;
        drop(nodes);
        self.graph.push(vec![m, n], value, rg, Op::Transpose(self.id))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&self) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.id];
        let (n, m) = rows_cols(&a.shape);
        let mut value = vec![0.0; n * m];
        for i in 0..n {
            let row = &a.value[i * m..(i + 1) * m];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..m {
                let e = (row[j] - max).exp();
                value[i * m + j] = e;
                sum += e;
            }
            for j in 0..m {
                value[i * m + j] /= sum;
            }
        }
        let (shape, rg) = (a.shape.clone(), a.requires_grad);
        drop(nodes);
        self.graph.push(shape, value, rg, Op::SoftmaxRows(self.id))
    }

    /// GELU with the tanh approximation (the variant whose derivative we
    /// back-propagate exactly).
    pub fn gelu(&self) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.id];
        let value: Vec<f64> = a.value.iter().map(|&x| gelu(x)).collect();
        let (shape, rg) = (a.shape.clone(), a.requires_grad);
        drop(nodes);
        self.graph.push(shape, value, rg, Op::Gelu(self.id))
    }

    /// Per-row layer normalization over the feature axis, then `*gamma + beta`.
    pub fn layer_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f64) -> Tensor {
        self.same_graph(gamma);
        self.same_graph(beta);
        let nodes = self.graph.nodes.borrow();
        let (x, g, b) = (&nodes[self.id], &nodes[gamma.id], &nodes[beta.id]);
        let (n, d) = rows_cols(&x.shape);
        assert_eq!(g.value.len(), d, "layer_norm gamma length mismatch");
        assert_eq!(b.value.len(), d, "layer_norm beta length mismatch");
        let mut value = vec![0.0; n * d];
        for i in 0..n {
            let row = &x.value[i * d..(i + 1) * d];
            let (mean, var) = mean_var(row);
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..d {
                value[i * d + j] = (row[j] - mean) * inv * g.value[j] + b.value[j];
            }
        }
        let rg = x.requires_grad || g.requires_grad || b.requires_grad;
        let shape = x.shape.clone();
        drop(nodes);
        self.graph.push(
            shape,
            value,
            rg,
            Op::LayerNorm {
                x: self.id,
                gamma: gamma.id,
                beta: beta.id,
                eps,
            },
        )
    }

    /// Scale row `k` by the affine importance `w*scores[k] + b` (`w`, `b`
    /// scalar parameters, `scores` fixed per instance).
    pub fn scale_rows_affine(&self, w: &Tensor, b: &Tensor, scores: &[f64]) -> Tensor {
        self.same_graph(w);
        self.same_graph(b);
        let nodes = self.graph.nodes.borrow();
        let (x, wn, bn) = (&nodes[self.id], &nodes[w.id], &nodes[b.id]);
        let (n, d) = rows_cols(&x.shape);
        assert_eq!(scores.len(), n, "scores length {} != rows {}", scores.len(), n);
        assert_eq!(wn.value.len(), 1, "w must be a scalar");
        assert_eq!(bn.value.len(), 1, "b must be a scalar");
        let (wv, bv) = (wn.value[0], bn.value[0]);
        let mut value = vec![0.0; n * d];
        for k in 0..n {
            let s = wv * scores[k] + bv;
            for j in 0..d {
                value[k * d + j] = x.value[k * d + j] * s;
            }
        }
        let rg = x.requires_grad || wn.requires_grad || bn.requires_grad;
        let shape = x.shape.clone();
        drop(nodes);
        self.graph.push(
            shape,
            value,
            rg,
            Op::ScaleRowsAffine {
                x: self.id,
                w: w.id,
                b: b.id,
                scores: Rc::new(scores.to_vec()),
            },
        )
    }

    /// Add a length-`d` bias vector to every row.
    pub fn add_row_bias(&self, bias: &Tensor) -> Tensor {
        self.same_graph(bias);
        let nodes = self.graph.nodes.borrow();
        let (x, b) = (&nodes[self.id], &nodes[bias.id]);
        let (n, d) = rows_cols(&x.shape);
        assert_eq!(b.value.len(), d, "bias length mismatch: {} vs {}", b.value.len(), d);
        let mut value = x.value.clone();
        for i in 0..n {
            for j in 0..d {
                value[i * d + j] += b.value[j];
            }
        }
        let rg = x.requires_grad || b.requires_grad;
        let shape = x.shape.clone();
        drop(nodes);
        self.graph.push(shape, value, rg, Op::AddRowBias { x: self.id, bias: bias.id })
    }

    /// Concatenate along the sequence (row) axis; `other` rows come last.
    pub fn concat_rows(&self, other: &Tensor) -> Tensor {
        self.same_graph(other);
        let nodes = self.graph.nodes.borrow();
        let (a, b) = (&nodes[self.id], &nodes[other.id]);
        let (n1, d1) = rows_cols(&a.shape);
        let (n2, d2) = rows_cols(&b.shape);
        assert_eq!(d1, d2, "concat_rows column mismatch: {} vs {}", d1, d2);
        let mut value = Vec::with_capacity((n1 + n2) * d1);
        value.extend_from_slice(&a.value);
        value.extend_from_slice(&b.value);
        let rg = a.requires_grad || b.requires_grad;
        drop(nodes);
        self.graph.push(vec![n1 + n2, d1], value, rg, Op::ConcatRows(self.id, other.id))
    }

    /// Concatenate along the feature (column) axis.
    pub fn concat_cols(&self, other: &Tensor) -> Tensor {
        self.same_graph(other);
        let nodes = self.graph.nodes.borrow();
        let (a, b) = (&nodes[self.id], &nodes[other.id]);
        let (n1, d1) = rows_cols(&a.shape);
        let (n2, d2) = rows_cols(&b.shape);
        assert_eq!(n1, n2, "concat_cols row mismatch: {} vs {}", n1, n2);
        let mut value = Vec::with_capacity(n1 * (d1 + d2));
        for i in 0..n1 {
            value.extend_from_slice(&a.value[i * d1..(i + 1) * d1]);
            value.extend_from_slice(&b.value[i * d2..(i + 1) * d2]);
        }
        let rg = a.requires_grad || b.requires_grad;
        drop(nodes);
        self.graph.push(vec![n1, d1 + d2], value, rg, Op::ConcatCols(self.id, other.id))
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.id];
        let (n, d) = rows_cols(&a.shape);
        assert!(start <= end && end <= n, "slice_rows {}..{} out of {} rows", start, end, n);
        let value = a.value[start * d..end * d].to_vec();
        let rg = a.requires_grad;
        drop(nodes);
        self.graph.push(
            vec![end - start, d],
            value,
            rg,
            Op::SliceRows { x: self.id, start, end },
        )
    }

    /// Embedding lookup: output row `i` is table row `indices[i]`.
    pub fn gather_rows(&self, indices: &[usize]) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let t = &nodes[self.id];
        let (v, d) = rows_cols(&t.shape);
        let mut value = Vec::with_capacity(indices.len() * d);
        for &idx in indices {
            assert!(idx < v, "gather index {} out of table size {}", idx, v);
            value.extend_from_slice(&t.value[idx * d..(idx + 1) * d]);
        }
        let rg = t.requires_grad;
        drop(nodes);
        self.graph.push(
            vec![indices.len(), d],
            value,
            rg,
            Op::GatherRows {
                table: self.id,
                indices: Rc::new(indices.to_vec()),
            },
        )
    }

    /// Mean over rows, keeping a `[1, d]` shape.
    pub fn mean_rows(&self) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.id];
        let (n, d) = rows_cols(&a.shape);
        assert!(n > 0, "mean_rows over an empty tensor");
        let mut value = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                value[j] += a.value[i * d + j];
            }
        }
        for v in &mut value {
            *v /= n as f64;
        }
        let rg = a.requires_grad;
        drop(nodes);
        self.graph.push(vec![1, d], value, rg, Op::MeanRows(self.id))
    }

    pub fn sum_all(&self) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.id];
        let value = vec![a.value.iter().sum()];
        let rg = a.requires_grad;
        drop(nodes);
        self.graph.push(vec![1], value, rg, Op::SumAll(self.id))
    }

    /// Cross-entropy of a single logit vector against `target`.
    pub fn cross_entropy(&self, target: usize) -> Tensor {
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.id];
        let c = a.value.len();
        assert!(target < c, "target {} out of {} classes", target, c);
        let max = a.value.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + a.value.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        let value = vec![lse - a.value[target]];
        let rg = a.requires_grad;
        drop(nodes);
        self.graph.push(
            vec![1],
            value,
            rg,
            Op::CrossEntropy { logits: self.id, target },
        )
    }

    /// Reverse pass from a scalar. Gradients accumulate into every
    /// `requires_grad` node of the graph.
    pub fn backward(&self) {
        let mut nodes = self.graph.nodes.borrow_mut();
        assert_eq!(nodes[self.id].value.len(), 1, "backward requires a scalar output");
        assert!(nodes[self.id].requires_grad, "backward from a node with no gradient path");
        nodes[self.id].grad[0] += 1.0;

        for id in (0..=self.id).rev() {
            if !nodes[id].requires_grad {
                continue;
            }
            let op = nodes[id].op.clone();
            if matches!(op, Op::Leaf) {
                continue;
            }
            let grad_out = nodes[id].grad.clone();
            let contribs = backward_op(&nodes, &op, id, &grad_out);
            for (pid, contrib) in contribs {
                if !nodes[pid].requires_grad {
                    continue;
                }
                let g = &mut nodes[pid].grad;
                for (gi, ci) in g.iter_mut().zip(&contrib) {
                    *gi += ci;
                }
            }
        }
    }
}

/// Per-op vector-Jacobian products. Returns `(parent id, contribution)`
/// pairs; contributions are full-size buffers matching the parent.
fn backward_op(nodes: &[Node], op: &Op, id: usize, g: &[f64]) -> Vec<(usize, Vec<f64>)> {
    match *op {
        Op::Leaf => Vec::new(),
        Op::Add(a, b) => vec![(a, g.to_vec()), (b, g.to_vec())],
        Op::Sub(a, b) => vec![(a, g.to_vec()), (b, g.iter().map(|x| -x).collect())],
        Op::Mul(a, b) => {
            let da = g.iter().zip(&nodes[b].value).map(|(gi, bv)| gi * bv).collect();
            let db = g.iter().zip(&nodes[a].value).map(|(gi, av)| gi * av).collect();
            vec![(a, da), (b, db)]
        }
        Op::Scale(a, c) => vec![(a, g.iter().map(|x| x * c).collect())],
        Op::MatMul(a, b) => {
            let (n, m) = rows_cols(&nodes[a].shape);
            let (_, p) = rows_cols(&nodes[b].shape);
            // dA = G B^T, dB = A^T G
            let mut da = vec![0.0; n * m];
            for i in 0..n {
                for k in 0..m {
                    let mut acc = 0.0;
                    for j in 0..p {
                        acc += g[i * p + j] * nodes[b].value[k * p + j];
                    }
                    da[i * m + k] = acc;
                }
            }
            let mut db = vec![0.0; m * p];
            for k in 0..m {
                for j in 0..p {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += nodes[a].value[i * m + k] * g[i * p + j];
                    }
                    db[k * p + j] = acc;
                }
            }
            vec![(a, da), (b, db)]
        }
        Op::Transpose(a) => {
            let (n, m) = rows_cols(&nodes[a].shape);
            let mut da = vec![0.0; n * m];
            for i in 0..n {
                for j in 0..m {
                    da[i * m + j] = g[j * n + i];
                }
            }
            vec![(a, da)]
        }
        Op::SoftmaxRows(a) => {
            let (n, m) = rows_cols(&nodes[a].shape);
            let y = &nodes[id].value;
            let mut da = vec![0.0; n * m];
            for i in 0..n {
                let dot: f64 = (0..m).map(|j| g[i * m + j] * y[i * m + j]).sum();
                for j in 0..m {
                    da[i * m + j] = y[i * m + j] * (g[i * m + j] - dot);
                }
            }
            vec![(a, da)]
        }
        Op::Gelu(a) => {
            let da = nodes[a]
                .value
                .iter()
                .zip(g)
                .map(|(&x, gi)| gi * gelu_deriv(x))
                .collect();
            vec![(a, da)]
        }
        Op::LayerNorm { x, gamma, beta, eps } => {
            let (n, d) = rows_cols(&nodes[x].shape);
            let xv = &nodes[x].value;
            let gv = &nodes[gamma].value;
            let mut dx = vec![0.0; n * d];
            let mut dgamma = vec![0.0; d];
            let mut dbeta = vec![0.0; d];
            for i in 0..n {
                let row = &xv[i * d..(i + 1) * d];
                let (mean, var) = mean_var(row);
                let inv = 1.0 / (var + eps).sqrt();
                let xhat: Vec<f64> = row.iter().map(|&v| (v - mean) * inv).collect();
                let grow = &g[i * d..(i + 1) * d];
                let mut dxhat = vec![0.0; d];
                for j in 0..d {
                    dbeta[j] += grow[j];
                    dgamma[j] += grow[j] * xhat[j];
                    dxhat[j] = grow[j] * gv[j];
                }
                let mean_dxhat: f64 = dxhat.iter().sum::<f64>() / d as f64;
                let mean_dxhat_xhat: f64 =
                    dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                for j in 0..d {
                    dx[i * d + j] = inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                }
            }
            vec![(x, dx), (gamma, dgamma), (beta, dbeta)]
        }
        Op::ScaleRowsAffine { x, w, b, ref scores } => {
            let (n, d) = rows_cols(&nodes[x].shape);
            let xv = &nodes[x].value;
            let wv = nodes[w].value[0];
            let bv = nodes[b].value[0];
            let mut dx = vec![0.0; n * d];
            let mut dw = 0.0;
            let mut db = 0.0;
            for k in 0..n {
                let s = wv * scores[k] + bv;
                let mut dot = 0.0;
                for j in 0..d {
                    dx[k * d + j] = g[k * d + j] * s;
                    dot += g[k * d + j] * xv[k * d + j];
                }
                dw += scores[k] * dot;
                db += dot;
            }
            vec![(x, dx), (w, vec![dw]), (b, vec![db])]
        }
        Op::AddRowBias { x, bias } => {
            let (n, d) = rows_cols(&nodes[x].shape);
            let mut db = vec![0.0; d];
            for i in 0..n {
                for j in 0..d {
                    db[j] += g[i * d + j];
                }
            }
            vec![(x, g.to_vec()), (bias, db)]
        }
        Op::ConcatRows(a, b) => {
            let na = numel(&nodes[a].shape);
            vec![(a, g[..na].to_vec()), (b, g[na..].to_vec())]
        }
        Op::ConcatCols(a, b) => {
            let (n, d1) = rows_cols(&nodes[a].shape);
            let (_, d2) = rows_cols(&nodes[b].shape);
            let mut da = vec![0.0; n * d1];
            let mut db = vec![0.0; n * d2];
            for i in 0..n {
                da[i * d1..(i + 1) * d1].copy_from_slice(&g[i * (d1 + d2)..i * (d1 + d2) + d1]);
                db[i * d2..(i + 1) * d2]
                    .copy_from_slice(&g[i * (d1 + d2) + d1..(i + 1) * (d1 + d2)]);
            }
            vec![(a, da), (b, db)]
        }
        Op::SliceRows { x, start, end } => {
            let (n, d) = rows_cols(&nodes[x].shape);
            let mut dx = vec![0.0; n * d];
            dx[start * d..end * d].copy_from_slice(g);
            vec![(x, dx)]
        }
        Op::GatherRows { table, ref indices } => {
            let (v, d) = rows_cols(&nodes[table].shape);
            let mut dt = vec![0.0; v * d];
            for (i, &idx) in indices.iter().enumerate() {
                for j in 0..d {
                    dt[idx * d + j] += g[i * d + j];
                }
            }
            vec![(table, dt)]
        }
        Op::MeanRows(a) => {
            let (n, d) = rows_cols(&nodes[a].shape);
            let scale = 1.0 / n as f64;
            let mut da = vec![0.0; n * d];
            for i in 0..n {
                for j in 0..d {
                    da[i * d + j] = g[j] * scale;
                }
            }
            vec![(a, da)]
        }
        Op::SumAll(a) => {
            let da = vec![g[0]; numel(&nodes[a].shape)];
            vec![(a, da)]
        }
        Op::CrossEntropy { logits, target } => {
            let lv = &nodes[logits].value;
            let max = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = lv.iter().map(|&l| (l - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let mut dl: Vec<f64> = exps.iter().map(|e| g[0] * e / sum).collect();
            dl[target] -= g[0];
            vec![(logits, dl)]
        }
    }
}

fn matmul(a: &[f64], b: &[f64], n: usize, m: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        for k in 0..m {
            let av = a[i * m + k];
            if av == 0.0 {
                continue;
            }
            let brow = &b[k * p..(k + 1) * p];
            let orow = &mut out[i * p..(i + 1) * p];
            for j in 0..p {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

fn mean_var(row: &[f64]) -> (f64, f64) {
    let d = row.len() as f64;
    let mean = row.iter().sum::<f64>() / d;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d;
    (mean, var)
}

const GELU_C: f64 = 0.797884560802865; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_deriv(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}
