//! Synthetic treebanks from a small mirrored grammar.
//!
//! Sentences are generated head-final: every dependent precedes its head.
//! The head-initial variant is the exact mirror image (token order
//! reversed), so the two treebanks differ only in direction.
//!
//! One attachment is ambiguous until the verb is seen: a prepositional
//! phrase right before the object noun modifies the verb when the verb is
//! a motion verb (suffix `-ri`) and the noun otherwise. Head-final order
//! puts that verb after everything it disambiguates.
//!
//! With `extraposition > 0`, a modifier of the subject is sometimes moved
//! to the end of the sentence, which makes the tree non-projective.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::{Sentence, Token, Treebank};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordOrder {
    HeadFinal,
    HeadInitial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sentences: usize,
    pub seed: u64,
    pub order: WordOrder,
    /// Probability of extraposing a subject modifier.
    pub extraposition: f64,
}

struct Lexicon {
    nouns: Vec<String>,
    adjectives: Vec<String>,
    motion_verbs: Vec<String>,
    other_verbs: Vec<String>,
    determiners: Vec<String>,
    adpositions: Vec<String>,
    adverbs: Vec<String>,
}

const ONSETS: [&str; 10] = ["k", "t", "p", "s", "m", "n", "l", "b", "d", "g"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

fn word(rng: &mut impl Rng, syllables: usize, suffix: &str) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("nonempty"));
        w.push_str(VOWELS.choose(rng).expect("nonempty"));
    }
    w + suffix
}

fn words(rng: &mut impl Rng, n: usize, syllables: usize, suffix: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    while out.len() < n {
        let w = word(rng, syllables, suffix);
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

impl Lexicon {
    fn new(rng: &mut impl Rng) -> Self {
        Lexicon {
            nouns: words(rng, 40, 2, "n"),
            adjectives: words(rng, 15, 2, "l"),
            motion_verbs: words(rng, 6, 1, "ri"),
            other_verbs: words(rng, 6, 1, "mo"),
            determiners: words(rng, 3, 1, ""),
            adpositions: words(rng, 4, 1, "k"),
            adverbs: words(rng, 6, 2, "s"),
        }
    }
}

/// A node of the sentence tree; dependents listed in head-final surface
/// order (all before the head).
struct Node {
    form: String,
    upos: &'static str,
    deprel: &'static str,
    deps: Vec<usize>,
}

struct Builder<'l, R> {
    lex: &'l Lexicon,
    rng: &'l mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn node(&mut self, pool: fn(&Lexicon) -> &Vec<String>, upos: &'static str, deprel: &'static str) -> usize {
        let form = pool(self.lex).choose(self.rng).expect("nonempty").clone();
        self.nodes.push(Node {
            form,
            upos,
            deprel,
            deps: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn noun_phrase(&mut self, deprel: &'static str, p_adj: f64) -> usize {
        let n = self.node(|l| &l.nouns, "NOUN", deprel);
        if self.rng.gen_bool(0.5) {
            let d = self.node(|l| &l.determiners, "DET", "det");
            self.nodes[n].deps.push(d);
        }
        if self.rng.gen_bool(p_adj) {
            let a = self.node(|l| &l.adjectives, "ADJ", "amod");
            self.nodes[n].deps.push(a);
        }
        n
    }

    /// `[ADP (DET) NOUN]`, headed by the noun.
    fn adpositional_phrase(&mut self, deprel: &'static str) -> usize {
        let n = self.node(|l| &l.nouns, "NOUN", deprel);
        let c = self.node(|l| &l.adpositions, "ADP", "case");
        self.nodes[n].deps.push(c);
        if self.rng.gen_bool(0.3) {
            let d = self.node(|l| &l.determiners, "DET", "det");
            self.nodes[n].deps.push(d);
        }
        n
    }
}

fn linearize(nodes: &[Node], at: usize, out: &mut Vec<usize>, skip: Option<usize>) {
    for &d in &nodes[at].deps {
        if Some(d) != skip {
            linearize(nodes, d, out, skip);
        }
    }
    out.push(at);
}

fn sentence<R: Rng>(lex: &Lexicon, rng: &mut R, extraposition: f64) -> Sentence {
    let mut b = Builder {
        lex,
        rng,
        nodes: Vec::new(),
    };
    let motion = b.rng.gen_bool(0.5);
    let verb = if motion {
        b.node(|l| &l.motion_verbs, "VERB", "root")
    } else {
        b.node(|l| &l.other_verbs, "VERB", "root")
    };

    let subj = b.noun_phrase("nsubj", 0.3);
    let mut subj_mod = None;
    if b.rng.gen_bool(0.3) {
        let pp = b.adpositional_phrase("nmod");
        b.nodes[subj].deps.insert(0, pp);
        subj_mod = Some(pp);
    }
    b.nodes[verb].deps.push(subj);

    if b.rng.gen_bool(0.3) {
        let adv = b.node(|l| &l.adverbs, "ADV", "advmod");
        b.nodes[verb].deps.push(adv);
    }

    if b.rng.gen_bool(0.7) {
        let pp = b.adpositional_phrase(if motion { "obl" } else { "nmod" });
        let obj = b.noun_phrase("obj", 0.4);
        if motion {
            b.nodes[verb].deps.push(pp);
        } else {
            b.nodes[obj].deps.insert(0, pp);
        }
        b.nodes[verb].deps.push(obj);
    } else if b.rng.gen_bool(0.5) {
        let obj = b.noun_phrase("obj", 0.4);
        b.nodes[verb].deps.push(obj);
    }

    let extraposed = subj_mod.filter(|_| b.rng.gen_bool(extraposition));
    let mut order = Vec::new();
    linearize(&b.nodes, verb, &mut order, extraposed);
    if let Some(pp) = extraposed {
        linearize(&b.nodes, pp, &mut order, None);
    }

    let mut position = vec![0; b.nodes.len()];
    for (i, &node) in order.iter().enumerate() {
        position[node] = i + 1;
    }
    let mut heads = vec![0; b.nodes.len()];
    for (h, node) in b.nodes.iter().enumerate() {
        for &d in &node.deps {
            heads[d] = position[h];
        }
    }
    let tokens = order
        .iter()
        .enumerate()
        .map(|(i, &node)| {
            let n = &b.nodes[node];
            Token::new(i + 1, n.form.clone())
                .with_upos(n.upos)
                .with_head(heads[node], n.deprel)
        })
        .collect();
    Sentence::new(tokens)
}

/// Reverses token order, keeping the tree.
pub fn mirror(sentence: &Sentence) -> Sentence {
    let n = sentence.len();
    let flip = |i: usize| if i == 0 { 0 } else { n + 1 - i };
    let tokens = sentence
        .tokens
        .iter()
        .rev()
        .map(|t| {
            let mut t = t.clone();
            t.id = flip(t.id);
            t.head = t.head.map(flip);
            t
        })
        .collect();
    Sentence {
        tokens,
        comments: sentence.comments.clone(),
    }
}

pub fn generate(cfg: &SynthConfig) -> Treebank {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lex = Lexicon::new(&mut rng);
    let name = match cfg.order {
        WordOrder::HeadFinal => "synth-head-final",
        WordOrder::HeadInitial => "synth-head-initial",
    };
    let sentences = (0..cfg.sentences)
        .map(|_| {
            let s = sentence(&lex, &mut rng, cfg.extraposition);
            match cfg.order {
                WordOrder::HeadFinal => s,
                WordOrder::HeadInitial => mirror(&s),
            }
        })
        .collect();
    Treebank::new(name, sentences)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{crossed_arcs, default_content_relations, find_cycle, treebank_stats};

    fn cfg(order: WordOrder, extraposition: f64) -> SynthConfig {
        SynthConfig {
            sentences: 200,
            seed: 5,
            order,
            extraposition,
        }
    }

    #[test]
    fn trees_are_valid() {
        for tb in [generate(&cfg(WordOrder::HeadFinal, 0.5)), generate(&cfg(WordOrder::HeadInitial, 0.5))] {
            for s in &tb.sentences {
                let heads = s.heads().unwrap();
                assert_eq!(find_cycle(&heads), None);
                assert_eq!(heads.iter().skip(1).filter(|&&h| h == 0).count(), 1);
            }
        }
    }

    #[test]
    fn directions_are_strict_without_extraposition() {
        let rel = default_content_relations();
        let hf = treebank_stats(&generate(&cfg(WordOrder::HeadFinal, 0.0)), &rel);
        let hi = treebank_stats(&generate(&cfg(WordOrder::HeadInitial, 0.0)), &rel);
        assert_eq!(hf.right_headedness, Some(1.0));
        assert_eq!(hi.right_headedness, Some(0.0));
        assert_eq!(hf.nonprojective_arc_fraction, 0.0);
    }

    #[test]
    fn head_initial_mirrors_head_final() {
        let hf = generate(&cfg(WordOrder::HeadFinal, 0.3));
        let hi = generate(&cfg(WordOrder::HeadInitial, 0.3));
        for (a, b) in hf.sentences.iter().zip(&hi.sentences) {
            assert_eq!(&mirror(a), b);
        }
    }

    #[test]
    fn extraposition_makes_crossing_arcs() {
        let tb = generate(&cfg(WordOrder::HeadFinal, 1.0));
        let crossing = tb
            .sentences
            .iter()
            .filter(|s| crossed_arcs(&s.heads().unwrap()).iter().any(|&c| c))
            .count();
        assert!(crossing > 0);
    }

    #[test]
    fn same_seed_same_treebank() {
        let a = generate(&cfg(WordOrder::HeadFinal, 0.2));
        let b = generate(&cfg(WordOrder::HeadFinal, 0.2));
        assert_eq!(a, b);
    }
}
