use rand::Rng;

use super::{AutodiffError, Graph, Init, ParamId, ParameterStore, Tensor};
use crate::scalar::Scalar;

/// Gate weights of one LSTM cell. Each gate reads `[x; h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_input: ParamId,
    pub w_forget: ParamId,
    pub w_output: ParamId,
    pub w_candidate: ParamId,
    pub b_input: ParamId,
    pub b_forget: ParamId,
    pub b_output: ParamId,
    pub b_candidate: ParamId,
}

impl LstmCellParams {
    /// Registers `{prefix}.w_i`, `{prefix}.b_i`, ... Weights are Glorot
    /// initialised, biases zero except the forget gate bias (1.0).
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParameterStore<T>,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, AutodiffError> {
        let cols = input_dim + hidden_dim;
        let w = |gate: &str, store: &mut ParameterStore<T>, rng: &mut R| {
            store.add(&format!("{prefix}.w_{gate}"), hidden_dim, cols, Init::Glorot, rng)
        };
        let w_input = w("i", store, rng)?;
        let w_forget = w("f", store, rng)?;
        let w_output = w("o", store, rng)?;
        let w_candidate = w("g", store, rng)?;
        let b = |gate: &str, init: Init, store: &mut ParameterStore<T>, rng: &mut R| {
            store.add(&format!("{prefix}.b_{gate}"), hidden_dim, 1, init, rng)
        };
        let b_input = b("i", Init::Zeros, store, rng)?;
        let b_forget = b("f", Init::Constant(1.0), store, rng)?;
        let b_output = b("o", Init::Zeros, store, rng)?;
        let b_candidate = b("g", Init::Zeros, store, rng)?;
        Ok(LstmCellParams {
            input_dim,
            hidden_dim,
            w_input,
            w_forget,
            w_output,
            w_candidate,
            b_input,
            b_forget,
            b_output,
            b_candidate,
        })
    }

    /// Looks up a cell previously registered under `prefix`.
    pub fn find<T: Scalar>(store: &ParameterStore<T>, prefix: &str) -> Result<Self, AutodiffError> {
        let id = |name: String| store.id(&name).ok_or(AutodiffError::UnknownParam(name));
        let w_input = id(format!("{prefix}.w_i"))?;
        let p = store.param(w_input);
        Ok(LstmCellParams {
            input_dim: p.cols - p.rows,
            hidden_dim: p.rows,
            w_input,
            w_forget: id(format!("{prefix}.w_f"))?,
            w_output: id(format!("{prefix}.w_o"))?,
            w_candidate: id(format!("{prefix}.w_g"))?,
            b_input: id(format!("{prefix}.b_i"))?,
            b_forget: id(format!("{prefix}.b_f"))?,
            b_output: id(format!("{prefix}.b_o"))?,
            b_candidate: id(format!("{prefix}.b_g"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zero<T: Scalar>(graph: &mut Graph<'_, T>, hidden_dim: usize) -> Self {
        LstmState {
            h: graph.zeros(hidden_dim),
            c: graph.zeros(hidden_dim),
        }
    }
}

/// One step of the gated recurrence:
/// `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_step<T: Scalar>(
    graph: &mut Graph<'_, T>,
    params: &LstmCellParams,
    state: LstmState,
    x: Tensor,
) -> Result<LstmState, AutodiffError> {
    if x.shape() != (params.input_dim, 1) {
        return Err(AutodiffError::ShapeMismatch {
            op: "lstm_step",
            left: (params.input_dim, 1),
            right: x.shape(),
        });
    }
    for t in [state.h, state.c] {
        if t.shape() != (params.hidden_dim, 1) {
            return Err(AutodiffError::ShapeMismatch {
                op: "lstm_step",
                left: (params.hidden_dim, 1),
                right: t.shape(),
            });
        }
    }
    let xh = graph.concat(&[x, state.h])?;
    let gate = |w: ParamId, b: ParamId, graph: &mut Graph<'_, T>| {
        let (w, b) = (graph.param(w), graph.param(b));
        graph.affine(w, xh, b)
    };
    let i = gate(params.w_input, params.b_input, graph)?;
    let f = gate(params.w_forget, params.b_forget, graph)?;
    let o = gate(params.w_output, params.b_output, graph)?;
    let g = gate(params.w_candidate, params.b_candidate, graph)?;
    let (i, f, o, g) = (
        graph.sigmoid(i),
        graph.sigmoid(f),
        graph.sigmoid(o),
        graph.tanh(g),
    );
    let keep = graph.mul(f, state.c)?;
    let write = graph.mul(i, g)?;
    let c = graph.add(keep, write)?;
    let squashed = graph.tanh(c);
    let h = graph.mul(o, squashed)?;
    Ok(LstmState { h, c })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Runs a cell over `xs` from a zero state. The result is index-aligned
/// with the input: for `Backward`, entry `i` has consumed `xs[i..]`.
pub fn run_lstm<T: Scalar>(
    graph: &mut Graph<'_, T>,
    params: &LstmCellParams,
    xs: &[Tensor],
    direction: Direction,
) -> Result<Vec<Tensor>, AutodiffError> {
    if xs.is_empty() {
        return Err(AutodiffError::EmptySequence);
    }
    let mut state = LstmState::zero(graph, params.hidden_dim);
    let mut out = vec![state.h; xs.len()];
    let order: Box<dyn Iterator<Item = usize>> = match direction {
        Direction::Forward => Box::new(0..xs.len()),
        Direction::Backward => Box::new((0..xs.len()).rev()),
    };
    for i in order {
        state = lstm_step(graph, params, state, xs[i])?;
        out[i] = state.h;
    }
    Ok(out)
}
