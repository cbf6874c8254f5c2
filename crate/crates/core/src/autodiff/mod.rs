//! Tape-based reverse-mode differentiation over dense column vectors and
//! matrices.
//!
//! A [`Graph`] borrows a [`ParameterStore`] for reading. Operations append
//! nodes to the tape and return lightweight [`Tensor`] handles. After
//! [`Graph::backward`], the collected parameter gradients are folded into
//! the store with [`ParameterStore::accumulate`].

mod lstm;
mod params;

pub use lstm::{lstm_step, run_lstm, Direction, LstmCellParams, LstmState};
pub use params::{adam_step, Adam, Gradients, Init, Param, ParamId, ParameterStore};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("backward requires a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("{op}: index {index} out of range for length {len}")]
    OutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
}

type Result<T> = std::result::Result<T, AutodiffError>;

/// Handle to a node in a [`Graph`]. Only valid for the graph that made it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tensor {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Tensor {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Param(ParamId),
    Lookup { param: ParamId, row: usize },
    Affine { w: usize, x: usize, b: Option<usize> },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Tanh(usize),
    Sigmoid(usize),
    Concat(Vec<usize>),
    Slice { src: usize, start: usize },
    Sum(usize),
    Pick { src: usize, index: usize },
    Scale(usize, T),
    AddScalar(usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    rows: usize,
    cols: usize,
    /// Empty for parameter nodes, which read from the store.
    value: Vec<T>,
    op: Op<T>,
}

pub struct Graph<'p, T: Scalar> {
    store: &'p ParameterStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<usize>>,
    grads: Gradients<T>,
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(store: &'p ParameterStore<T>) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
            grads: Gradients::new(store.len()),
        }
    }

    pub fn store(&self) -> &'p ParameterStore<T> {
        self.store
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<T>, op: Op<T>) -> Tensor {
        let id = self.nodes.len();
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Tensor { id, rows, cols }
    }

    pub fn value(&self, t: Tensor) -> &[T] {
        let node = &self.nodes[t.id];
        match node.op {
            Op::Param(pid) => &self.store.param(pid).value,
            _ => &node.value,
        }
    }

    fn val(&self, id: usize) -> &[T] {
        let node = &self.nodes[id];
        match node.op {
            Op::Param(pid) => &self.store.param(pid).value,
            _ => &node.value,
        }
    }

    /// The single value of a 1x1 tensor.
    pub fn scalar(&self, t: Tensor) -> T {
        self.value(t)[0]
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<T>) -> Result<Tensor> {
        if value.len() != rows * cols {
            return Err(AutodiffError::ShapeMismatch {
                op: "constant",
                left: (rows, cols),
                right: (value.len(), 1),
            });
        }
        Ok(self.push(rows, cols, value, Op::Constant))
    }

    pub fn vector(&mut self, value: Vec<T>) -> Tensor {
        let n = value.len();
        self.push(n, 1, value, Op::Constant)
    }

    pub fn zeros(&mut self, n: usize) -> Tensor {
        self.vector(vec![T::zero(); n])
    }

    /// The parameter as a graph leaf. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Tensor {
        if let Some(node) = self.param_nodes[id] {
            let n = &self.nodes[node];
            return Tensor {
                id: node,
                rows: n.rows,
                cols: n.cols,
            };
        }
        let p = self.store.param(id);
        let t = self.push(p.rows, p.cols, Vec::new(), Op::Param(id));
        self.param_nodes[id] = Some(t.id);
        t
    }

    /// Row `row` of a parameter matrix as a column vector (embedding lookup).
    pub fn lookup(&mut self, id: ParamId, row: usize) -> Result<Tensor> {
        let p = self.store.param(id);
        if row >= p.rows {
            return Err(AutodiffError::OutOfRange {
                op: "lookup",
                index: row,
                len: p.rows,
            });
        }
        let value = p.value[row * p.cols..(row + 1) * p.cols].to_vec();
        let cols = p.cols;
        Ok(self.push(cols, 1, value, Op::Lookup { param: id, row }))
    }

    /// `w·x + b`.
    pub fn affine(&mut self, w: Tensor, x: Tensor, b: Tensor) -> Result<Tensor> {
        self.linear(w, x, Some(b))
    }

    pub fn matvec(&mut self, w: Tensor, x: Tensor) -> Result<Tensor> {
        self.linear(w, x, None)
    }

    fn linear(&mut self, w: Tensor, x: Tensor, b: Option<Tensor>) -> Result<Tensor> {
        if x.cols != 1 || w.cols != x.rows {
            return Err(AutodiffError::ShapeMismatch {
                op: "affine",
                left: w.shape(),
                right: x.shape(),
            });
        }
        if let Some(b) = b {
            if b.shape() != (w.rows, 1) {
                return Err(AutodiffError::ShapeMismatch {
                    op: "affine",
                    left: (w.rows, 1),
                    right: b.shape(),
                });
            }
        }
        let (m, n) = (w.rows, w.cols);
        let wv = self.val(w.id);
        let xv = self.val(x.id);
        let mut out = match b {
            Some(b) => self.val(b.id).to_vec(),
            None => vec![T::zero(); m],
        };
        for (i, o) in out.iter_mut().enumerate() {
            let row = &wv[i * n..(i + 1) * n];
            let mut acc = T::zero();
            for (a, c) in row.iter().zip(xv) {
                acc += *a * *c;
            }
            *o += acc;
        }
        Ok(self.push(
            m,
            1,
            out,
            Op::Affine {
                w: w.id,
                x: x.id,
                b: b.map(|b| b.id),
            },
        ))
    }

    fn same_shape(&self, op: &'static str, a: Tensor, b: Tensor) -> Result<()> {
        if a.shape() != b.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op,
                left: a.shape(),
                right: b.shape(),
            });
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Tensor, b: Tensor, f: impl Fn(T, T) -> T, op: Op<T>) -> Tensor {
        let value = self
            .val(a.id)
            .iter()
            .zip(self.val(b.id))
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(a.rows, a.cols, value, op)
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x + y, Op::Add(a.id, b.id)))
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x - y, Op::Sub(a.id, b.id)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x * y, Op::Mul(a.id, b.id)))
    }

    fn map(&mut self, a: Tensor, f: impl Fn(T) -> T, op: Op<T>) -> Tensor {
        let value = self.val(a.id).iter().map(|&x| f(x)).collect();
        self.push(a.rows, a.cols, value, op)
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        self.map(a, T::tanh, Op::Tanh(a.id))
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        self.map(a, |x| T::one() / (T::one() + (-x).exp()), Op::Sigmoid(a.id))
    }

    pub fn scale(&mut self, a: Tensor, c: T) -> Tensor {
        self.map(a, |x| x * c, Op::Scale(a.id, c))
    }

    pub fn add_scalar(&mut self, a: Tensor, c: T) -> Tensor {
        self.map(a, |x| x + c, Op::AddScalar(a.id))
    }

    /// Stacks column vectors.
    pub fn concat(&mut self, parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(AutodiffError::EmptySequence);
        }
        let mut value = Vec::new();
        for p in parts {
            if p.cols != 1 {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat",
                    left: (p.rows, 1),
                    right: p.shape(),
                });
            }
            value.extend_from_slice(self.val(p.id));
        }
        let n = value.len();
        Ok(self.push(n, 1, value, Op::Concat(parts.iter().map(|p| p.id).collect())))
    }

    /// Entries `start..start + len` of a column vector.
    pub fn slice(&mut self, a: Tensor, start: usize, len: usize) -> Result<Tensor> {
        if a.cols != 1 || start + len > a.rows {
            return Err(AutodiffError::OutOfRange {
                op: "slice",
                index: start + len,
                len: a.rows,
            });
        }
        let value = self.val(a.id)[start..start + len].to_vec();
        Ok(self.push(len, 1, value, Op::Slice { src: a.id, start }))
    }

    pub fn sum(&mut self, a: Tensor) -> Tensor {
        let s = self.val(a.id).iter().copied().sum();
        self.push(1, 1, vec![s], Op::Sum(a.id))
    }

    pub fn pick(&mut self, a: Tensor, index: usize) -> Result<Tensor> {
        let v = self.val(a.id);
        if index >= v.len() {
            return Err(AutodiffError::OutOfRange {
                op: "pick",
                index,
                len: v.len(),
            });
        }
        let x = v[index];
        Ok(self.push(1, 1, vec![x], Op::Pick { src: a.id, index }))
    }

    /// Sum of 1x1 tensors.
    pub fn sum_scalars(&mut self, terms: &[Tensor]) -> Result<Tensor> {
        let stacked = self.concat(terms)?;
        Ok(self.sum(stacked))
    }

    /// Back-propagates from `loss`, adding parameter gradients to this
    /// graph's gradient table. Calling twice doubles the gradients.
    pub fn backward(&mut self, loss: Tensor) -> Result<()> {
        if loss.shape() != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(loss.shape()));
        }
        let mut grads: Vec<Vec<T>> = vec![Vec::new(); loss.id + 1];
        grads[loss.id] = vec![T::one()];

        fn slot<T: Scalar>(grads: &mut [Vec<T>], id: usize, len: usize) -> &mut Vec<T> {
            let g = &mut grads[id];
            if g.is_empty() {
                *g = vec![T::zero(); len];
            }
            g
        }

        for id in (0..=loss.id).rev() {
            if grads[id].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut grads[id]);
            let node = &self.nodes[id];
            let len_of = |i: usize| self.nodes[i].rows * self.nodes[i].cols;
            match &node.op {
                Op::Constant => {}
                Op::Param(pid) => {
                    let acc = self.grads.slot(*pid, g.len());
                    for (a, x) in acc.iter_mut().zip(&g) {
                        *a += *x;
                    }
                }
                Op::Lookup { param, row } => {
                    let p = self.store.param(*param);
                    let acc = self.grads.slot(*param, p.rows * p.cols);
                    for (a, x) in acc[row * p.cols..(row + 1) * p.cols].iter_mut().zip(&g) {
                        *a += *x;
                    }
                }
                Op::Affine { w, x, b } => {
                    let (w, x, b) = (*w, *x, *b);
                    let n = self.nodes[w].cols;
                    let wv = self.val(w);
                    let xv = self.val(x);
                    {
                        let gw = slot(&mut grads, w, wv.len());
                        for (i, gi) in g.iter().enumerate() {
                            if gi.is_zero() {
                                continue;
                            }
                            for (a, xj) in gw[i * n..(i + 1) * n].iter_mut().zip(xv) {
                                *a += *gi * *xj;
                            }
                        }
                    }
                    {
                        let gx = slot(&mut grads, x, n);
                        for (i, gi) in g.iter().enumerate() {
                            if gi.is_zero() {
                                continue;
                            }
                            for (a, wij) in gx.iter_mut().zip(&wv[i * n..(i + 1) * n]) {
                                *a += *gi * *wij;
                            }
                        }
                    }
                    if let Some(b) = b {
                        let gb = slot(&mut grads, b, g.len());
                        for (a, x) in gb.iter_mut().zip(&g) {
                            *a += *x;
                        }
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) {
                        -T::one()
                    } else {
                        T::one()
                    };
                    let (a, b) = (*a, *b);
                    for (acc, x) in slot(&mut grads, a, g.len()).iter_mut().zip(&g) {
                        *acc += *x;
                    }
                    for (acc, x) in slot(&mut grads, b, g.len()).iter_mut().zip(&g) {
                        *acc += sign * *x;
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let av = self.val(a);
                    let bv = self.val(b);
                    for ((acc, x), y) in slot(&mut grads, a, g.len()).iter_mut().zip(&g).zip(bv) {
                        *acc += *x * *y;
                    }
                    for ((acc, x), y) in slot(&mut grads, b, g.len()).iter_mut().zip(&g).zip(av) {
                        *acc += *x * *y;
                    }
                }
                Op::Tanh(a) => {
                    let a = *a;
                    let out = &node.value;
                    let ga = slot(&mut grads, a, g.len());
                    for ((acc, x), y) in ga.iter_mut().zip(&g).zip(out) {
                        *acc += *x * (T::one() - *y * *y);
                    }
                }
                Op::Sigmoid(a) => {
                    let a = *a;
                    let out = &node.value;
                    let ga = slot(&mut grads, a, g.len());
                    for ((acc, x), y) in ga.iter_mut().zip(&g).zip(out) {
                        *acc += *x * *y * (T::one() - *y);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = len_of(p);
                        let gp = slot(&mut grads, p, len);
                        for (acc, x) in gp.iter_mut().zip(&g[offset..offset + len]) {
                            *acc += *x;
                        }
                        offset += len;
                    }
                }
                Op::Slice { src, start } => {
                    let (src, start) = (*src, *start);
                    let gs = slot(&mut grads, src, len_of(src));
                    for (acc, x) in gs[start..start + g.len()].iter_mut().zip(&g) {
                        *acc += *x;
                    }
                }
                Op::Sum(a) => {
                    let a = *a;
                    let len = len_of(a);
                    for acc in slot(&mut grads, a, len).iter_mut() {
                        *acc += g[0];
                    }
                }
                Op::Pick { src, index } => {
                    let (src, index) = (*src, *index);
                    let len = len_of(src);
                    slot(&mut grads, src, len)[index] += g[0];
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    for (acc, x) in slot(&mut grads, a, g.len()).iter_mut().zip(&g) {
                        *acc += *x * c;
                    }
                }
                Op::AddScalar(a) => {
                    let a = *a;
                    for (acc, x) in slot(&mut grads, a, g.len()).iter_mut().zip(&g) {
                        *acc += *x;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn gradients(&self) -> &Gradients<T> {
        &self.grads
    }

    pub fn into_gradients(self) -> Gradients<T> {
        self.grads
    }
}
