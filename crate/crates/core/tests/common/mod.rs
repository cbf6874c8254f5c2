//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treecomp::autodiff::Graph;
use treecomp::conllu::{parse_conllu, Sentence, Treebank};
use treecomp::ensemble::ArcVoteMatrix;
use treecomp::model::StepOptions;
use treecomp::transition::{Configuration, Oracle, Transition};
use treecomp::wordrep::{build_vocab, Composition, Dims, Extractor, ReprConfig};
use treecomp::ParserModel;

/// Random tree over 1..=n: attach nodes in a random order, each to a node
/// attached earlier (or the root). Produces non-projective trees freely.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n + 1];
    let mut placed = vec![0];
    for d in order {
        heads[d] = placed[rng.gen_range(0..placed.len())];
        placed.push(d);
    }
    heads
}

/// Quadratic crossing test over all arc pairs, root arcs included.
pub fn is_projective(heads: &[usize]) -> bool {
    let arcs: Vec<(usize, usize)> = (1..heads.len())
        .map(|d| (heads[d].min(d), heads[d].max(d)))
        .collect();
    for &(a, b) in &arcs {
        for &(c, d) in &arcs {
            if a < c && c < b && b < d {
                return false;
            }
        }
    }
    true
}

pub fn unlabeled_loss(c: &Configuration, gold: &[usize]) -> u32 {
    (1..gold.len())
        .filter(|&d| c.head(d) != Some(gold[d]))
        .count() as u32
}

/// Moves allowed when the stack top must go behind the buffer front: only
/// SWAP. Otherwise everything legal except SWAP.
pub fn permitted(c: &Configuration, oracle: &Oracle) -> Vec<Transition> {
    if oracle.swap_needed(c) {
        return vec![Transition::Swap];
    }
    [Transition::Shift, Transition::LeftArc(0), Transition::RightArc(0)]
        .into_iter()
        .filter(|&t| c.is_legal(t))
        .collect()
}

/// Exhaustive minimum reachable loss.
pub fn best_loss(
    c: &Configuration,
    gold: &[usize],
    oracle: &Oracle,
    memo: &mut HashMap<Configuration, u32>,
) -> u32 {
    if c.is_terminal() {
        return unlabeled_loss(c, gold);
    }
    if let Some(&v) = memo.get(c) {
        return v;
    }
    let v = permitted(c, oracle)
        .into_iter()
        .map(|t| best_loss(&c.applied(t).unwrap(), gold, oracle, memo))
        .min()
        .expect("a non-terminal configuration has a permitted move");
    memo.insert(c.clone(), v);
    v
}

/// Walks random permitted paths over random trees and compares every
/// permitted transition's cost with exhaustive search. Returns the number
/// of comparisons and the first mismatch.
pub fn check_costs(seed: u64, trees: usize, max_n: usize) -> (usize, Option<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..trees {
        let n = rng.gen_range(1..=max_n);
        let gold = random_tree(&mut rng, n);
        let labels = vec![0; n + 1];
        let oracle = Oracle::new(&gold, &labels);
        let mut memo = HashMap::new();
        let mut c = Configuration::initial(n).unwrap();
        while !c.is_terminal() {
            let base = best_loss(&c, &gold, &oracle, &mut memo);
            let verdict = oracle.verdict(&c);
            let moves = permitted(&c, &oracle);
            for &t in &moves {
                let after = best_loss(&c.applied(t).unwrap(), &gold, &oracle, &mut memo);
                if verdict.cost(t) != Some(after - base) {
                    return (
                        checked,
                        Some(format!("tree {gold:?} at {c:?}: {t} costs {:?}, search says {}", verdict.cost(t), after - base)),
                    );
                }
                checked += 1;
            }
            c.apply(moves[rng.gen_range(0..moves.len())]).unwrap();
        }
    }
    (checked, None)
}

/// Follows random zero-cost transitions; true iff the gold tree (heads and
/// labels) comes out.
pub fn zero_cost_path_is_gold(rng: &mut impl Rng, heads: &[usize], labels: &[usize], n_labels: usize) -> bool {
    let n = heads.len() - 1;
    let oracle = Oracle::new(heads, labels);
    let mut c = Configuration::initial(n).unwrap();
    let mut steps = 0;
    while !c.is_terminal() {
        let zero = oracle.verdict(&c).zero_cost_set(n_labels);
        if zero.is_empty() || steps == Configuration::step_cap(n) {
            return false;
        }
        c.apply(zero[rng.gen_range(0..zero.len())]).unwrap();
        steps += 1;
    }
    (1..=n).all(|d| c.head(d) == Some(heads[d]) && c.label(d) == Some(labels[d]))
}

/// Heaviest arborescence by enumerating every head assignment.
pub fn brute_force_mst(m: &ArcVoteMatrix, single_root: bool) -> u64 {
    let n = m.n;
    let mut heads = vec![0; n + 1];
    let mut best = None;
    loop {
        let valid = (1..=n).all(|d| heads[d] != d)
            && treecomp::conllu::find_cycle(&heads).is_none()
            && (!single_root || (1..=n).filter(|&d| heads[d] == 0).count() == 1);
        if valid {
            let w = m.weight(&heads);
            best = Some(best.map_or(w, |b: u64| b.max(w)));
        }
        // odometer over heads[1..=n] in 0..=n
        let mut i = 1;
        while i <= n && heads[i] == n {
            heads[i] = 0;
            i += 1;
        }
        if i > n {
            break;
        }
        heads[i] += 1;
    }
    best.expect("a star from the root is always valid")
}

pub fn is_tree(heads: &[usize]) -> bool {
    let n = heads.len() - 1;
    (1..=n).all(|d| heads[d] <= n && heads[d] != d) && treecomp::conllu::find_cycle(heads).is_none()
}

pub const THREE_TOKENS: &str = "\
1\tthe\t_\tDET\t_\t_\t2\tdet\t_\t_
2\tdog\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tbarks\t_\tVERB\t_\t_\t0\troot\t_\t_

";

pub fn tiny_config(extractor: Extractor, composition: Composition) -> ReprConfig {
    ReprConfig {
        extractor,
        composition,
        dims: Dims::tiny(),
        ..ReprConfig::default()
    }
}

pub fn model_for(text: &str, cfg: ReprConfig, seed: u64) -> (Treebank, ParserModel) {
    let tb = parse_conllu(text).unwrap();
    let vocab = build_vocab(&tb, 1).unwrap();
    (tb, ParserModel::new(cfg, vocab, seed).unwrap())
}

fn loss_value(model: &ParserModel, sentence: &Sentence) -> f64 {
    let opts = StepOptions {
        margin: 1.0,
        explore: 0.0,
        word_dropout: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut graph = Graph::new(&model.store);
    match model.sentence_loss(&mut graph, sentence, &opts, &mut rng).unwrap() {
        Some(l) => graph.scalar(l),
        None => 0.0,
    }
}

/// Largest relative error between backpropagated and central-difference
/// gradients over every parameter entry. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-3)`, so entries with near-zero gradient are
/// compared absolutely.
pub fn gradient_check(cfg: ReprConfig) -> f64 {
    let (tb, mut model) = model_for(THREE_TOKENS, cfg, 5);
    let sentence = tb.sentences[0].clone();
    let opts = StepOptions {
        margin: 1.0,
        explore: 0.0,
        word_dropout: 0.0,
    };
    let analytic = {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut graph = Graph::new(&model.store);
        let loss = model
            .sentence_loss(&mut graph, &sentence, &opts, &mut rng)
            .unwrap()
            .expect("untrained model violates the margin");
        graph.backward(loss).unwrap();
        graph.into_gradients()
    };
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for id in 0..model.store.len() {
        let zeros = vec![0.0; model.store.param(id).value.len()];
        let a = analytic.get(id).map(<[f64]>::to_vec).unwrap_or(zeros);
        for k in 0..a.len() {
            let x = model.store.param(id).value[k];
            model.store.param_mut(id).value[k] = x + eps;
            let up = loss_value(&model, &sentence);
            model.store.param_mut(id).value[k] = x - eps;
            let down = loss_value(&model, &sentence);
            model.store.param_mut(id).value[k] = x;
            let numeric = (up - down) / (2.0 * eps);
            let err = (a[k] - numeric).abs() / a[k].abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(err);
        }
    }
    worst
}

pub const CAUSAL: &str = "\
1\tthe\t_\tDET\t_\t_\t2\tdet\t_\t_
2\tdog\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tbarks\t_\tVERB\t_\t_\t0\troot\t_\t_
4\tat\t_\tADP\t_\t_\t5\tcase\t_\t_
5\tcats\t_\tNOUN\t_\t_\t3\tobl\t_\t_

";

/// Token vectors (root at 0) of the sentence and of a copy where token
/// `j` is replaced by another word with another tag.
pub fn perturbed_vectors(extractor: Extractor, j: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let cfg = ReprConfig {
        extractor,
        dims: Dims::tiny(),
        ..ReprConfig::default()
    };
    let (tb, model) = model_for(CAUSAL, cfg, 9);
    let original = tb.sentences[0].clone();
    let mut changed = original.clone();
    let k = if j == 1 { 5 } else { 1 };
    changed.tokens[j - 1].form = original.tokens[k - 1].form.clone();
    changed.tokens[j - 1].upos = original.tokens[k - 1].upos.clone();
    let vectors = |s: &Sentence| {
        let enc = model.vocab.encode(s);
        let mut graph = Graph::new(&model.store);
        let state = model.prepare(&mut graph, &enc).unwrap();
        state.tokens.iter().map(|&t| graph.value(t).to_vec()).collect::<Vec<_>>()
    };
    (vectors(&original), vectors(&changed))
}

/// For fw: positions before `j` unchanged; for bw: positions after `j`.
/// Also requires the perturbed position itself to change.
pub fn causality_holds(extractor: Extractor) -> bool {
    let n = 5;
    (1..=n).all(|j| {
        let (a, b) = perturbed_vectors(extractor, j);
        let untouched: Vec<usize> = match extractor {
            Extractor::Fw => (0..j).collect(),
            Extractor::Bw => (j + 1..=n).collect(),
            Extractor::Bi => Vec::new(),
        };
        untouched.iter().all(|&i| a[i] == b[i]) && a[j] != b[j]
    })
}

/// Feature width and initial subtree vectors for one configuration: the
/// width must be 3 (no composition) or 6 token-vector widths, and every
/// subtree vector must start as a copy of its token vector.
pub fn composition_plumbing(extractor: Extractor, composition: Composition) -> Result<(), String> {
    let (tb, model) = model_for(CAUSAL, tiny_config(extractor, composition), 3);
    let sentence = &tb.sentences[0];
    let enc = model.vocab.encode(sentence);
    let mut graph = Graph::new(&model.store);
    let state = model.prepare(&mut graph, &enc).unwrap();
    let v = graph.value(state.tokens[1]).len();
    let slots = if composition == Composition::None { 3 } else { 6 };
    let mut c = Configuration::initial(sentence.len()).unwrap();
    c.apply(Transition::Shift).unwrap();
    c.apply(Transition::Shift).unwrap();
    let f = model.feature_vector(&mut graph, &state, &c).unwrap();
    let width = graph.value(f).len();
    if width != slots * v || model.config.feature_dim() != width {
        return Err(format!("{extractor}+{composition}: width {width}, token width {v}"));
    }
    match (&state.subtrees, composition) {
        (None, Composition::None) => Ok(()),
        (Some(st), Composition::Rc | Composition::Lc) => {
            for (i, &t) in state.tokens.iter().enumerate() {
                if graph.value(st.vector(i)) != graph.value(t) {
                    return Err(format!("{extractor}+{composition}: c_{i} differs from v_{i}"));
                }
            }
            Ok(())
        }
        _ => Err(format!("{extractor}+{composition}: subtree state mismatch")),
    }
}
