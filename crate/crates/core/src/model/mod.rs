//! The parser: feature slots (s1, s0, b0), an MLP over labeled
//! transitions, greedy decoding, and hinge-loss training driven by the
//! oracle with error exploration.
//!
//! Output units are laid out as `[SHIFT, SWAP, LEFT_ARC(0..L), RIGHT_ARC(0..L)]`.

mod file;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{
    adam_step, Adam, AutodiffError, Graph, Init, ParamId, ParameterStore, Tensor,
};
use crate::composition::{CompositionParams, Subtrees};
use crate::conllu::{Sentence, Treebank};
use crate::eval::{score_trees, EvalError};
use crate::scalar::Scalar;
use crate::transition::{Arc, Configuration, Oracle, Transition, TransitionError};
use crate::wordrep::{
    extract_tokens, ArcDirection, EncodedSentence, ReprConfig, VocabError, Vocabulary,
    WordRepParams,
};

pub use file::{MAGIC, VERSION};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(String),
    #[error("training treebank is empty")]
    EmptyTreebank,
    #[error("training sentence {0} has no complete tree")]
    MissingTree(usize),
    #[error("no derivation finished within {0} transitions")]
    StepCap(usize),
}

pub fn output_dim(n_labels: usize) -> usize {
    2 + 2 * n_labels
}

pub fn transition_index(t: Transition, n_labels: usize) -> usize {
    match t {
        Transition::Shift => 0,
        Transition::Swap => 1,
        Transition::LeftArc(l) => 2 + l,
        Transition::RightArc(l) => 2 + n_labels + l,
    }
}

pub fn transition_at(i: usize, n_labels: usize) -> Transition {
    match i {
        0 => Transition::Shift,
        1 => Transition::Swap,
        i if i < 2 + n_labels => Transition::LeftArc(i - 2),
        i => Transition::RightArc(i - 2 - n_labels),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub margin: f64,
    /// Probability of following a higher-scoring wrong transition.
    pub explore: f64,
    /// First epoch (1-based) with exploration.
    pub explore_from: usize,
    pub word_dropout: f64,
    pub adam: Adam,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            seed: 1,
            margin: 1.0,
            explore: 0.1,
            explore_from: 2,
            word_dropout: 0.25,
            adam: Adam::default(),
        }
    }
}

/// Per-sentence training switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub margin: f64,
    pub explore: f64,
    pub word_dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub las: Option<f64>,
    pub uas: Option<f64>,
}

impl EpochMetrics {
    pub const TSV_HEADER: &'static str = "epoch\tloss\tlas\tuas";

    pub fn tsv_row(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{:.2}", 100.0 * v));
        format!("{}\t{:.4}\t{}\t{}", self.epoch, self.loss, pct(self.las), pct(self.uas))
    }
}

/// Mean dev scores of the `k` epochs with the highest LAS (fewer if the run
/// is shorter). `None` without dev scores.
pub fn top_k_mean(metrics: &[EpochMetrics], k: usize) -> Option<(f64, f64)> {
    let mut scored: Vec<(f64, f64)> = metrics
        .iter()
        .filter_map(|m| Some((m.las?, m.uas?)))
        .collect();
    if scored.is_empty() || k == 0 {
        return None;
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(k);
    let n = scored.len() as f64;
    let las = scored.iter().map(|s| s.0).sum::<f64>() / n;
    let uas = scored.iter().map(|s| s.1).sum::<f64>() / n;
    Some((las, uas))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mlp {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Debug, Clone)]
pub struct ParserModel<T: Scalar> {
    pub config: ReprConfig,
    pub vocab: Vocabulary,
    pub store: ParameterStore<T>,
    pub wordrep: WordRepParams,
    pub composition: Option<CompositionParams>,
    pub pad: ParamId,
    pub mlp: Mlp,
}

/// Token vectors and subtree states for one sentence in one graph.
#[derive(Debug, Clone)]
pub struct SentenceState {
    pub tokens: Vec<Tensor>,
    pub subtrees: Option<Subtrees>,
}

impl<T: Scalar> ParserModel<T> {
    /// A freshly initialised model; `seed` fixes every initial value.
    pub fn new(config: ReprConfig, vocab: Vocabulary, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let wordrep = WordRepParams::new(&mut store, &vocab, &config, &mut rng)?;
        let composition = CompositionParams::new(&mut store, &config, vocab.n_relations(), &mut rng)?;
        let pad = store.add("pad", config.slot_dim(), 1, Init::Glorot, &mut rng)?;
        let (h, out) = (config.dims.mlp_hidden, output_dim(vocab.n_labels()));
        let mlp = Mlp {
            w1: store.add("mlp.w1", h, config.feature_dim(), Init::Glorot, &mut rng)?,
            b1: store.add("mlp.b1", h, 1, Init::Zeros, &mut rng)?,
            w2: store.add("mlp.w2", out, h, Init::Glorot, &mut rng)?,
            b2: store.add("mlp.b2", out, 1, Init::Zeros, &mut rng)?,
        };
        Ok(ParserModel {
            config,
            vocab,
            store,
            wordrep,
            composition,
            pad,
            mlp,
        })
    }

    /// Reattaches parameter handles to a loaded store.
    pub fn from_store(
        config: ReprConfig,
        vocab: Vocabulary,
        store: ParameterStore<T>,
    ) -> Result<Self, ModelError> {
        let wordrep = WordRepParams::find(&store, &config)?;
        let composition = CompositionParams::find(&store, &config)?;
        let id = |name: &str| store.id(name).ok_or_else(|| AutodiffError::UnknownParam(name.to_owned()));
        let pad = id("pad")?;
        let mlp = Mlp {
            w1: id("mlp.w1")?,
            b1: id("mlp.b1")?,
            w2: id("mlp.w2")?,
            b2: id("mlp.b2")?,
        };
        let (w1, w2) = (store.param(mlp.w1), store.param(mlp.w2));
        if w1.cols != config.feature_dim() || w2.rows != output_dim(vocab.n_labels()) {
            return Err(ModelError::Format("MLP shape does not match the configuration".into()));
        }
        Ok(ParserModel {
            config,
            vocab,
            store,
            wordrep,
            composition,
            pad,
            mlp,
        })
    }

    pub fn n_labels(&self) -> usize {
        self.vocab.n_labels()
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.store.names().collect()
    }

    /// Runs the word representation layers once for a sentence.
    pub fn prepare(
        &self,
        graph: &mut Graph<'_, T>,
        sentence: &EncodedSentence,
    ) -> Result<SentenceState, ModelError> {
        let tokens = extract_tokens(graph, &self.wordrep, sentence)?;
        let subtrees = self.composition.map(|_| Subtrees::new(&tokens));
        Ok(SentenceState { tokens, subtrees })
    }

    fn slot(
        &self,
        graph: &mut Graph<'_, T>,
        state: &SentenceState,
        pos: Option<usize>,
    ) -> Result<Tensor, ModelError> {
        let Some(i) = pos else {
            return Ok(graph.param(self.pad));
        };
        match &state.subtrees {
            None => Ok(state.tokens[i]),
            Some(st) => Ok(graph.concat(&[state.tokens[i], st.vector(i)])?),
        }
    }

    /// `[slot(s1); slot(s0); slot(b0)]`.
    pub fn feature_vector(
        &self,
        graph: &mut Graph<'_, T>,
        state: &SentenceState,
        c: &Configuration,
    ) -> Result<Tensor, ModelError> {
        let s1 = self.slot(graph, state, c.stack_top(1))?;
        let s0 = self.slot(graph, state, c.stack_top(0))?;
        let b0 = self.slot(graph, state, c.buffer_front())?;
        Ok(graph.concat(&[s1, s0, b0])?)
    }

    /// Unnormalised scores over all labeled transitions.
    pub fn score(
        &self,
        graph: &mut Graph<'_, T>,
        state: &SentenceState,
        c: &Configuration,
    ) -> Result<Tensor, ModelError> {
        let f = self.feature_vector(graph, state, c)?;
        let (w1, b1) = (graph.param(self.mlp.w1), graph.param(self.mlp.b1));
        let (w2, b2) = (graph.param(self.mlp.w2), graph.param(self.mlp.b2));
        let z = graph.affine(w1, f, b1)?;
        let hidden = graph.tanh(z);
        Ok(graph.affine(w2, hidden, b2)?)
    }

    /// Updates subtree vectors after `arc` was built.
    pub fn on_arc(
        &self,
        graph: &mut Graph<'_, T>,
        state: &mut SentenceState,
        arc: Arc,
    ) -> Result<(), ModelError> {
        if let (Some(params), Some(st)) = (&self.composition, state.subtrees.as_mut()) {
            let rel = self
                .vocab
                .relation(arc.label, ArcDirection::of(arc.head, arc.dependent));
            st.on_arc(graph, params, arc.head, arc.dependent, rel)?;
        }
        Ok(())
    }

    /// Greedy decoding; returns `(head, label)` for tokens `1..=n`.
    pub fn parse(&self, sentence: &Sentence) -> Result<Vec<(usize, usize)>, ModelError> {
        self.parse_traced(sentence, |_, _| {})
    }

    /// Like [`parse`](Self::parse), calling `trace` after every transition.
    pub fn parse_traced(
        &self,
        sentence: &Sentence,
        mut trace: impl FnMut(Transition, &Configuration),
    ) -> Result<Vec<(usize, usize)>, ModelError> {
        let n = sentence.len();
        let mut c = Configuration::initial(n)?;
        let enc = self.vocab.encode(sentence);
        let mut graph = Graph::new(&self.store);
        let mut state = self.prepare(&mut graph, &enc)?;
        let n_labels = self.n_labels();
        let cap = Configuration::step_cap(n);
        let mut steps = 0;
        while !c.is_terminal() {
            if steps == cap {
                return Err(ModelError::StepCap(cap));
            }
            let scores = self.score(&mut graph, &state, &c)?;
            let values = graph.value(scores);
            let mut best: Option<(Transition, T)> = None;
            for (i, &s) in values.iter().enumerate() {
                let t = transition_at(i, n_labels);
                if c.is_legal(t) && best.is_none_or(|(_, b)| s > b) {
                    best = Some((t, s));
                }
            }
            let (t, _) = best.expect("a non-terminal configuration has a legal transition");
            if let Some(arc) = c.apply(t)? {
                self.on_arc(&mut graph, &mut state, arc)?;
            }
            trace(t, &c);
            steps += 1;
        }
        Ok((1..=n)
            .map(|d| (c.head(d).expect("terminal"), c.label(d).expect("terminal")))
            .collect())
    }

    /// A copy of `sentence` with predicted heads and relations.
    pub fn annotate(&self, sentence: &Sentence) -> Result<Sentence, ModelError> {
        let mut out = sentence.clone();
        if sentence.is_empty() {
            return Ok(out);
        }
        let arcs: Vec<(usize, String)> = self
            .parse(sentence)?
            .into_iter()
            .map(|(h, l)| (h, self.vocab.deprels.name(l).to_owned()))
            .collect();
        out.set_arcs(&arcs);
        Ok(out)
    }

    pub fn parse_treebank(&self, tb: &Treebank) -> Result<Treebank, ModelError> {
        let sentences = tb
            .sentences
            .iter()
            .map(|s| self.annotate(s))
            .collect::<Result<_, _>>()?;
        Ok(Treebank::new(tb.name.clone(), sentences))
    }

    /// Builds the summed hinge loss of one sentence in `graph`, walking the
    /// oracle path (with exploration). `None` when every step met the
    /// margin.
    pub fn sentence_loss<R: Rng + ?Sized>(
        &self,
        graph: &mut Graph<'_, T>,
        sentence: &Sentence,
        opts: &StepOptions,
        rng: &mut R,
    ) -> Result<Option<Tensor>, ModelError> {
        let (heads, labels) = self
            .vocab
            .gold(sentence)
            .ok_or(ModelError::MissingTree(0))?;
        let oracle = Oracle::new(&heads, &labels);
        let n = sentence.len();
        let n_labels = self.n_labels();
        let mut enc = self.vocab.encode(sentence);
        if opts.word_dropout > 0.0 {
            enc.drop_words(&self.vocab, opts.word_dropout, rng);
        }
        let mut state = self.prepare(graph, &enc)?;
        let mut c = Configuration::initial(n)?;
        let mut terms = Vec::new();
        let cap = Configuration::step_cap(n);
        let mut steps = 0;
        while !c.is_terminal() {
            if steps == cap {
                return Err(ModelError::StepCap(cap));
            }
            let scores = self.score(graph, &state, &c)?;
            let verdict = oracle.verdict(&c);
            let values = graph.value(scores);
            let mut good: Vec<usize> = Vec::new();
            let mut good_score = T::neg_infinity();
            let mut wrong: Option<(usize, T)> = None;
            for (i, &s) in values.iter().enumerate() {
                let t = transition_at(i, n_labels);
                if !c.is_legal(t) {
                    continue;
                }
                match verdict.cost(t) {
                    Some(0) => {
                        if s > good_score {
                            good.clear();
                            good_score = s;
                        }
                        if s == good_score {
                            good.push(i);
                        }
                    }
                    Some(_) => {
                        if wrong.is_none_or(|(_, b)| s > b) {
                            wrong = Some((i, s));
                        }
                    }
                    None => {}
                }
            }
            let g = match good.len() {
                0 => panic!("oracle left no zero-cost transition"),
                1 => good[0],
                k => good[rng.gen_range(0..k)],
            };
            let mut next = g;
            if let Some((w, w_score)) = wrong {
                let margin = T::of(opts.margin);
                if w_score > good_score - margin {
                    let sw = graph.pick(scores, w)?;
                    let sg = graph.pick(scores, g)?;
                    let diff = graph.sub(sw, sg)?;
                    terms.push(graph.add_scalar(diff, margin));
                }
                let wt = transition_at(w, n_labels);
                if opts.explore > 0.0
                    && w_score > good_score
                    && !verdict.swap_forced()
                    && wt != Transition::Swap
                    && rng.gen::<f64>() < opts.explore
                {
                    next = w;
                }
            }
            let t = transition_at(next, n_labels);
            if let Some(arc) = c.apply(t)? {
                self.on_arc(graph, &mut state, arc)?;
            }
            steps += 1;
        }
        if terms.is_empty() {
            return Ok(None);
        }
        Ok(Some(graph.sum_scalars(&terms)?))
    }

    /// One update on one sentence; returns its loss.
    pub fn train_sentence<R: Rng + ?Sized>(
        &mut self,
        sentence: &Sentence,
        opts: &StepOptions,
        adam: &Adam,
        rng: &mut R,
    ) -> Result<f64, ModelError> {
        let (loss, grads) = {
            let mut graph = Graph::new(&self.store);
            match self.sentence_loss(&mut graph, sentence, opts, rng)? {
                Some(l) => {
                    let v = graph.scalar(l).as_f64();
                    graph.backward(l)?;
                    (v, Some(graph.into_gradients()))
                }
                None => (0.0, None),
            }
        };
        if let Some(g) = grads {
            self.store.accumulate(&g);
            adam_step(&mut self.store, adam);
        }
        Ok(loss)
    }

    /// Trains for `tcfg.epochs` epochs. With a dev treebank the parameters
    /// of the best dev-LAS epoch are kept; `on_epoch` sees each epoch's
    /// metrics as they are produced.
    pub fn train(
        &mut self,
        train: &Treebank,
        dev: Option<&Treebank>,
        tcfg: &TrainConfig,
        mut on_epoch: impl FnMut(&EpochMetrics),
    ) -> Result<Vec<EpochMetrics>, ModelError> {
        let usable: Vec<usize> = (0..train.len()).filter(|&i| !train.sentences[i].is_empty()).collect();
        if usable.is_empty() {
            return Err(ModelError::EmptyTreebank);
        }
        for &i in &usable {
            if !train.sentences[i].has_tree() {
                return Err(ModelError::MissingTree(i + 1));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
        rng.set_stream(1);
        let mut order = usable;
        let mut metrics = Vec::with_capacity(tcfg.epochs);
        let mut best: Option<(f64, Vec<Vec<T>>)> = None;
        for epoch in 1..=tcfg.epochs {
            order.shuffle(&mut rng);
            let opts = StepOptions {
                margin: tcfg.margin,
                explore: if epoch >= tcfg.explore_from { tcfg.explore } else { 0.0 },
                word_dropout: tcfg.word_dropout,
            };
            let mut loss = 0.0;
            for &i in &order {
                loss += self.train_sentence(&train.sentences[i], &opts, &tcfg.adam, &mut rng)?;
            }
            let (mut las, mut uas) = (None, None);
            if let Some(dev) = dev {
                let score = score_trees(dev, &self.parse_treebank(dev)?)?;
                las = Some(score.las);
                uas = Some(score.uas);
                if best.as_ref().is_none_or(|(b, _)| score.las > *b) {
                    best = Some((score.las, self.store.snapshot()));
                }
            }
            let m = EpochMetrics {
                epoch,
                loss,
                las,
                uas,
            };
            on_epoch(&m);
            metrics.push(m);
        }
        if let Some((_, snapshot)) = best {
            self.store.restore(&snapshot);
        }
        Ok(metrics)
    }
}
