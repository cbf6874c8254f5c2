//! Recursive subtree vectors. Each position starts with a copy of its
//! token vector; when an arc is built, the head's vector is recomposed from
//! head, dependent and a direction-tagged relation embedding, either with a
//! single tanh layer (`rc`) or with an LSTM cell whose carry is private to
//! the head (`lc`).

use rand::Rng;

use crate::autodiff::{
    lstm_step, AutodiffError, Graph, Init, LstmCellParams, LstmState, ParamId, ParameterStore,
    Tensor,
};
use crate::scalar::Scalar;
use crate::wordrep::{Composition, CompositionInput, ReprConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Recurrent { w: ParamId, b: ParamId },
    Lstm(LstmCellParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompositionParams {
    pub cell: Cell,
    pub relation_emb: ParamId,
    pub input: CompositionInput,
    /// Subtree vector width, equal to the token vector width.
    pub dim: usize,
    pub relation_dim: usize,
}

impl CompositionParams {
    /// `None` when composition is off.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParameterStore<T>,
        cfg: &ReprConfig,
        n_relations: usize,
        rng: &mut R,
    ) -> Result<Option<Self>, AutodiffError> {
        let d = cfg.token_dim();
        let r = cfg.dims.relation;
        let cell = match cfg.composition {
            Composition::None => return Ok(None),
            Composition::Rc => Cell::Recurrent {
                w: store.add("compose.rc.w", d, 2 * d + r, Init::Glorot, rng)?,
                b: store.add("compose.rc.b", d, 1, Init::Zeros, rng)?,
            },
            Composition::Lc => Cell::Lstm(LstmCellParams::new(store, "compose.lc", 2 * d + r, d, rng)?),
        };
        let relation_emb = store.add("relation_emb", n_relations, r, Init::Glorot, rng)?;
        Ok(Some(CompositionParams {
            cell,
            relation_emb,
            input: cfg.composition_input,
            dim: d,
            relation_dim: r,
        }))
    }

    pub fn find<T: Scalar>(store: &ParameterStore<T>, cfg: &ReprConfig) -> Result<Option<Self>, AutodiffError> {
        let id = |name: &str| store.id(name).ok_or_else(|| AutodiffError::UnknownParam(name.to_owned()));
        let cell = match cfg.composition {
            Composition::None => return Ok(None),
            Composition::Rc => Cell::Recurrent {
                w: id("compose.rc.w")?,
                b: id("compose.rc.b")?,
            },
            Composition::Lc => Cell::Lstm(LstmCellParams::find(store, "compose.lc")?),
        };
        Ok(Some(CompositionParams {
            cell,
            relation_emb: id("relation_emb")?,
            input: cfg.composition_input,
            dim: cfg.token_dim(),
            relation_dim: cfg.dims.relation,
        }))
    }
}

/// Subtree vector of one head, with the LSTM state under `lc` once a
/// dependent has been attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubtreeState {
    pub c: Tensor,
    pub memory: Option<LstmState>,
}

impl SubtreeState {
    pub fn init(v: Tensor) -> Self {
        SubtreeState { c: v, memory: None }
    }
}

/// `tanh(W[h; d; r] + b)`.
pub fn compose_rc<T: Scalar>(
    graph: &mut Graph<'_, T>,
    w: ParamId,
    b: ParamId,
    head: Tensor,
    dep: Tensor,
    rel: Tensor,
) -> Result<Tensor, AutodiffError> {
    let input = graph.concat(&[head, dep, rel])?;
    let (w, b) = (graph.param(w), graph.param(b));
    let z = graph.affine(w, input, b)?;
    Ok(graph.tanh(z))
}

/// One step of the head's LSTM on `[h; d; r]`, from a zero state on the
/// first attachment.
pub fn compose_lc<T: Scalar>(
    graph: &mut Graph<'_, T>,
    cell: &LstmCellParams,
    memory: Option<LstmState>,
    head: Tensor,
    dep: Tensor,
    rel: Tensor,
) -> Result<LstmState, AutodiffError> {
    let input = graph.concat(&[head, dep, rel])?;
    let state = match memory {
        Some(s) => s,
        None => LstmState::zero(graph, cell.hidden_dim),
    };
    lstm_step(graph, cell, state, input)
}

/// Subtree states for every position of one sentence.
#[derive(Debug, Clone)]
pub struct Subtrees {
    tokens: Vec<Tensor>,
    states: Vec<SubtreeState>,
    attached: Vec<bool>,
}

impl Subtrees {
    pub fn new(tokens: &[Tensor]) -> Self {
        Subtrees {
            tokens: tokens.to_vec(),
            states: tokens.iter().map(|&v| SubtreeState::init(v)).collect(),
            attached: vec![false; tokens.len()],
        }
    }

    pub fn state(&self, i: usize) -> &SubtreeState {
        assert!(!self.attached[i], "subtree of attached position {i} read");
        &self.states[i]
    }

    pub fn vector(&self, i: usize) -> Tensor {
        self.state(i).c
    }

    /// Recomposes `head` after `dep` is attached with relation `relation`
    /// (a direction-tagged relation index).
    pub fn on_arc<T: Scalar>(
        &mut self,
        graph: &mut Graph<'_, T>,
        params: &CompositionParams,
        head: usize,
        dep: usize,
        relation: usize,
    ) -> Result<(), AutodiffError> {
        let rel = graph.lookup(params.relation_emb, relation)?;
        let (h, d) = match params.input {
            CompositionInput::Subtree => (self.vector(head), self.vector(dep)),
            CompositionInput::Token => (self.tokens[head], self.tokens[dep]),
        };
        let updated = match params.cell {
            Cell::Recurrent { w, b } => SubtreeState {
                c: compose_rc(graph, w, b, h, d, rel)?,
                memory: None,
            },
            Cell::Lstm(cell) => {
                let s = compose_lc(graph, &cell, self.states[head].memory, h, d, rel)?;
                SubtreeState {
                    c: s.h,
                    memory: Some(s),
                }
            }
        };
        self.states[head] = updated;
        self.attached[dep] = true;
        Ok(())
    }
}
