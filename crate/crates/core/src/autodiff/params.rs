use std::collections::HashMap;

use rand::Rng;

use super::AutodiffError;
use crate::scalar::Scalar;

pub type ParamId = usize;

/// A trainable matrix with its gradient accumulator and Adam moments.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Param<T> {
    fn new(name: String, rows: usize, cols: usize, value: Vec<T>) -> Self {
        let len = rows * cols;
        Param {
            name,
            rows,
            cols,
            value,
            grad: vec![T::zero(); len],
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Uniform in ±sqrt(6 / (rows + cols)).
    Glorot,
}

/// All named parameters of a model, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore<T> {
    params: Vec<Param<T>>,
    index: HashMap<String, ParamId>,
    steps: u64,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        ParameterStore {
            params: Vec::new(),
            index: HashMap::new(),
            steps: 0,
        }
    }

    pub fn add<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut R,
    ) -> Result<ParamId, AutodiffError> {
        let value = match init {
            Init::Zeros => vec![T::zero(); rows * cols],
            Init::Constant(c) => vec![T::of(c); rows * cols],
            Init::Glorot => {
                let limit = (6.0 / (rows + cols) as f64).sqrt();
                (0..rows * cols)
                    .map(|_| T::of(rng.gen_range(-limit..=limit)))
                    .collect()
            }
        };
        self.insert(name, rows, cols, value)
    }

    /// Registers a parameter with explicit values (row-major).
    pub fn insert(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        value: Vec<T>,
    ) -> Result<ParamId, AutodiffError> {
        if self.index.contains_key(name) {
            return Err(AutodiffError::DuplicateParam(name.to_owned()));
        }
        if value.len() != rows * cols {
            return Err(AutodiffError::ShapeMismatch {
                op: "insert",
                left: (rows, cols),
                right: (value.len(), 1),
            });
        }
        let id = self.params.len();
        self.params.push(Param::new(name.to_owned(), rows, cols, value));
        self.index.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, id: ParamId) -> &Param<T> {
        &self.params[id]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds a gradient table (from [`super::Graph::backward`]) into the
    /// accumulators.
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (param, grad) in self.params.iter_mut().zip(&grads.per_param) {
            if let Some(g) = grad {
                for (acc, &x) in param.grad.iter_mut().zip(g) {
                    *acc += x;
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn grad_is_zero(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.grad.iter().all(|g| g.is_zero()))
    }

    /// Copies parameter values only (for best-epoch snapshots).
    pub fn snapshot(&self) -> Vec<Vec<T>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<T>]) {
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            p.value.clone_from(v);
        }
    }
}

/// Gradients collected by one graph, indexed by parameter id.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub(crate) per_param: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub(crate) fn new(n_params: usize) -> Self {
        Gradients {
            per_param: vec![None; n_params],
        }
    }

    pub(crate) fn slot(&mut self, id: ParamId, len: usize) -> &mut Vec<T> {
        self.per_param[id].get_or_insert_with(|| vec![T::zero(); len])
    }

    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.per_param.get(id).and_then(|g| g.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every parameter, then zeroes the
/// gradients.
pub fn adam_step<T: Scalar>(store: &mut ParameterStore<T>, adam: &Adam) {
    store.steps += 1;
    let t = store.steps as i32;
    let (b1, b2) = (T::of(adam.beta1), T::of(adam.beta2));
    let correct1 = T::one() - b1.powi(t);
    let correct2 = T::one() - b2.powi(t);
    let (lr, eps) = (T::of(adam.lr), T::of(adam.eps));
    for p in &mut store.params {
        for i in 0..p.value.len() {
            let g = p.grad[i];
            p.m[i] = b1 * p.m[i] + (T::one() - b1) * g;
            p.v[i] = b2 * p.v[i] + (T::one() - b2) * g * g;
            let m_hat = p.m[i] / correct1;
            let v_hat = p.v[i] / correct2;
            p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            p.grad[i] = T::zero();
        }
    }
}
