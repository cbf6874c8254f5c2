//! Word representations: vocabularies, type vectors `x_i` built from word,
//! POS and character embeddings, and token vectors `v_i` from a BiLSTM,
//! backward LSTM or forward LSTM over the sentence.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{
    run_lstm, AutodiffError, Direction, Graph, Init, LstmCellParams, ParamId, ParameterStore,
    Tensor,
};
use crate::conllu::{base_relation, Sentence, Treebank};
use crate::scalar::Scalar;

pub const UNK: usize = 0;
pub const ROOT: usize = 1;
const RESERVED: [&str; 2] = ["<unk>", "<root>"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty treebank")]
    EmptyTreebank,
    #[error("sentence {sentence}, token {token}: no dependency relation")]
    MissingRelation { sentence: usize, token: usize },
}

/// Dense string index. Reserved entries occupy the first slots and are not
/// reachable through lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Index {
    items: Vec<String>,
    lookup: HashMap<String, usize>,
    reserved: usize,
}

impl Index {
    pub fn with_reserved(reserved: &[&str]) -> Self {
        Index {
            items: reserved.iter().map(|s| s.to_string()).collect(),
            lookup: HashMap::new(),
            reserved: reserved.len(),
        }
    }

    /// Rebuilds an index from its serialized item list.
    pub fn from_items(items: Vec<String>, reserved: usize) -> Self {
        let lookup = items
            .iter()
            .enumerate()
            .skip(reserved)
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Index {
            items,
            lookup,
            reserved,
        }
    }

    pub fn add(&mut self, item: &str) -> usize {
        if let Some(&i) = self.lookup.get(item) {
            return i;
        }
        let i = self.items.len();
        self.items.push(item.to_owned());
        self.lookup.insert(item.to_owned(), i);
        i
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.lookup.get(item).copied()
    }

    pub fn get_or_unk(&self, item: &str) -> usize {
        self.get(item).unwrap_or(UNK)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.items[i]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn reserved(&self) -> usize {
        self.reserved
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcDirection {
    /// The dependent precedes its head.
    Left,
    Right,
}

impl ArcDirection {
    pub fn of(head: usize, dependent: usize) -> Self {
        if dependent < head {
            ArcDirection::Left
        } else {
            ArcDirection::Right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: Index,
    /// Training frequency per word index (0 for reserved entries).
    pub word_counts: Vec<u64>,
    pub upos: Index,
    pub chars: Index,
    /// Base relations (subtypes stripped), no reserved entries.
    pub deprels: Index,
}

impl Vocabulary {
    /// Index of the direction-tagged relation `(label, direction)`.
    pub fn relation(&self, label: usize, direction: ArcDirection) -> usize {
        2 * label + (direction == ArcDirection::Right) as usize
    }

    pub fn n_relations(&self) -> usize {
        2 * self.deprels.len()
    }

    pub fn n_labels(&self) -> usize {
        self.deprels.len()
    }

    /// Maps a sentence to indices. Position 0 is the root symbol.
    pub fn encode(&self, sentence: &Sentence) -> EncodedSentence {
        let mut words = vec![ROOT];
        let mut upos = vec![ROOT];
        let mut chars = vec![vec![ROOT]];
        for tok in &sentence.tokens {
            words.push(self.words.get_or_unk(&tok.form));
            upos.push(tok.upos.as_deref().map_or(UNK, |p| self.upos.get_or_unk(p)));
            let cs: Vec<usize> = tok
                .form
                .chars()
                .map(|c| self.chars.get_or_unk(c.encode_utf8(&mut [0; 4])))
                .collect();
            chars.push(if cs.is_empty() { vec![UNK] } else { cs });
        }
        EncodedSentence { words, upos, chars }
    }

    /// Gold heads and label indices (index 0 unused). Labels missing from
    /// the vocabulary map to label 0.
    pub fn gold(&self, sentence: &Sentence) -> Option<(Vec<usize>, Vec<usize>)> {
        let heads = sentence.heads()?;
        let mut labels = vec![0];
        for tok in &sentence.tokens {
            let rel = tok.deprel.as_deref()?;
            labels.push(self.deprels.get(base_relation(rel)).unwrap_or(0));
        }
        Some((heads, labels))
    }
}

/// Builds vocabularies from a training treebank. Words seen fewer than
/// `min_count` times are left out and read as unknown.
pub fn build_vocab(tb: &Treebank, min_count: u64) -> Result<Vocabulary, VocabError> {
    if tb.sentences.iter().all(|s| s.tokens.is_empty()) {
        return Err(VocabError::EmptyTreebank);
    }
    let mut counts: Vec<(String, u64)> = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut upos = Index::with_reserved(&RESERVED);
    let mut chars = Index::with_reserved(&RESERVED);
    let mut deprels = Index::default();
    for (si, s) in tb.sentences.iter().enumerate() {
        for tok in &s.tokens {
            match seen.get(tok.form.as_str()) {
                Some(&i) => counts[i].1 += 1,
                None => {
                    seen.insert(&tok.form, counts.len());
                    counts.push((tok.form.clone(), 1));
                }
            }
            if let Some(p) = &tok.upos {
                upos.add(p);
            }
            for c in tok.form.chars() {
                chars.add(c.encode_utf8(&mut [0; 4]));
            }
            let rel = tok.deprel.as_deref().ok_or(VocabError::MissingRelation {
                sentence: si + 1,
                token: tok.id,
            })?;
            deprels.add(base_relation(rel));
        }
    }
    let mut words = Index::with_reserved(&RESERVED);
    let mut word_counts = vec![0; RESERVED.len()];
    for (w, c) in counts {
        if c >= min_count {
            words.add(&w);
            word_counts.push(c);
        }
    }
    Ok(Vocabulary {
        words,
        word_counts,
        upos,
        chars,
        deprels,
    })
}

/// A sentence as vocabulary indices, root symbol at position 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub words: Vec<usize>,
    pub upos: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
}

impl EncodedSentence {
    /// Number of positions including the root.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Replaces each word with the unknown index with probability
    /// `alpha / (alpha + freq)`. The root is never dropped.
    pub fn drop_words<R: Rng + ?Sized>(&mut self, vocab: &Vocabulary, alpha: f64, rng: &mut R) {
        for w in self.words.iter_mut().skip(1) {
            if *w == UNK {
                continue;
            }
            let freq = vocab.word_counts[*w] as f64;
            if rng.gen::<f64>() < alpha / (alpha + freq) {
                *w = UNK;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extractor {
    Bi,
    Bw,
    Fw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Composition {
    None,
    Rc,
    Lc,
}

/// What the composition cells read for the head and the dependent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompositionInput {
    /// Current subtree vectors `c_h`, `c_d`.
    Subtree,
    /// Token vectors `v_h`, `v_d`.
    Token,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} {value:?}")]
pub struct ParseConfigError {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! keyword_enum {
    ($ty:ident, $kind:literal, $($variant:ident => $name:literal),+) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = ParseConfigError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(ParseConfigError { kind: $kind, value: s.to_owned() }),
                }
            }
        }
    };
}

keyword_enum!(Extractor, "extractor", Bi => "bi", Bw => "bw", Fw => "fw");
keyword_enum!(Composition, "composition", None => "none", Rc => "rc", Lc => "lc");
keyword_enum!(CompositionInput, "composition input", Subtree => "subtree", Token => "token");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub word: usize,
    pub pos: usize,
    pub char_emb: usize,
    pub char_hidden: usize,
    pub seq_hidden: usize,
    pub relation: usize,
    pub mlp_hidden: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            word: 100,
            pos: 20,
            char_emb: 24,
            char_hidden: 50,
            seq_hidden: 125,
            relation: 20,
            mlp_hidden: 100,
        }
    }
}

impl Dims {
    /// Small sizes for tests and quick experiments.
    pub fn tiny() -> Self {
        Dims {
            word: 8,
            pos: 4,
            char_emb: 4,
            char_hidden: 4,
            seq_hidden: 8,
            relation: 4,
            mlp_hidden: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReprConfig {
    pub use_pos: bool,
    pub use_char: bool,
    pub extractor: Extractor,
    pub composition: Composition,
    pub composition_input: CompositionInput,
    pub dims: Dims,
}

impl Default for ReprConfig {
    fn default() -> Self {
        ReprConfig {
            use_pos: true,
            use_char: true,
            extractor: Extractor::Bi,
            composition: Composition::None,
            composition_input: CompositionInput::Subtree,
            dims: Dims::default(),
        }
    }
}

impl ReprConfig {
    pub fn type_dim(&self) -> usize {
        let d = &self.dims;
        d.word
            + if self.use_pos { d.pos } else { 0 }
            + if self.use_char { 2 * d.char_hidden } else { 0 }
    }

    pub fn token_dim(&self) -> usize {
        match self.extractor {
            Extractor::Bi => 2 * self.dims.seq_hidden,
            Extractor::Bw | Extractor::Fw => self.dims.seq_hidden,
        }
    }

    /// Width of one feature slot: `v` alone, or `v ∘ c` with composition.
    pub fn slot_dim(&self) -> usize {
        match self.composition {
            Composition::None => self.token_dim(),
            Composition::Rc | Composition::Lc => 2 * self.token_dim(),
        }
    }

    /// MLP input width: three slots (s1, s0, b0).
    pub fn feature_dim(&self) -> usize {
        3 * self.slot_dim()
    }
}

impl ReprConfig {
    /// Settings as `key=value` pairs, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let d = &self.dims;
        vec![
            ("extractor", self.extractor.to_string()),
            ("composition", self.composition.to_string()),
            ("composition_input", self.composition_input.to_string()),
            ("pos", self.use_pos.to_string()),
            ("char", self.use_char.to_string()),
            ("word_dim", d.word.to_string()),
            ("pos_dim", d.pos.to_string()),
            ("char_emb_dim", d.char_emb.to_string()),
            ("char_hidden_dim", d.char_hidden.to_string()),
            ("seq_hidden_dim", d.seq_hidden.to_string()),
            ("relation_dim", d.relation.to_string()),
            ("mlp_hidden_dim", d.mlp_hidden.to_string()),
        ]
    }

    /// Applies one `key=value` setting. Returns `Ok(false)` for keys this
    /// config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ParseConfigError> {
        let bad = |kind| ParseConfigError {
            kind,
            value: value.to_owned(),
        };
        let flag = |v: &str| v.parse::<bool>().map_err(|_| bad("boolean"));
        let size = |v: &str| match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(bad("dimension")),
        };
        let d = &mut self.dims;
        match key {
            "extractor" => self.extractor = value.parse()?,
            "composition" => self.composition = value.parse()?,
            "composition_input" => self.composition_input = value.parse()?,
            "pos" => self.use_pos = flag(value)?,
            "char" => self.use_char = flag(value)?,
            "word_dim" => d.word = size(value)?,
            "pos_dim" => d.pos = size(value)?,
            "char_emb_dim" => d.char_emb = size(value)?,
            "char_hidden_dim" => d.char_hidden = size(value)?,
            "seq_hidden_dim" => d.seq_hidden = size(value)?,
            "relation_dim" => d.relation = size(value)?,
            "mlp_hidden_dim" => d.mlp_hidden = size(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Parameter handles for the embedding tables and LSTMs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordRepParams {
    pub word_emb: ParamId,
    pub pos_emb: Option<ParamId>,
    pub char_emb: Option<ParamId>,
    pub char_fw: Option<LstmCellParams>,
    pub char_bw: Option<LstmCellParams>,
    pub seq_fw: Option<LstmCellParams>,
    pub seq_bw: Option<LstmCellParams>,
}

impl WordRepParams {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParameterStore<T>,
        vocab: &Vocabulary,
        cfg: &ReprConfig,
        rng: &mut R,
    ) -> Result<Self, AutodiffError> {
        let d = &cfg.dims;
        let word_emb = store.add("word_emb", vocab.words.len(), d.word, Init::Glorot, rng)?;
        let pos_emb = if cfg.use_pos {
            Some(store.add("pos_emb", vocab.upos.len(), d.pos, Init::Glorot, rng)?)
        } else {
            None
        };
        let (char_emb, char_fw, char_bw) = if cfg.use_char {
            let emb = store.add("char_emb", vocab.chars.len(), d.char_emb, Init::Glorot, rng)?;
            let fw = LstmCellParams::new(store, "char_lstm.fw", d.char_emb, d.char_hidden, rng)?;
            let bw = LstmCellParams::new(store, "char_lstm.bw", d.char_emb, d.char_hidden, rng)?;
            (Some(emb), Some(fw), Some(bw))
        } else {
            (None, None, None)
        };
        let x = cfg.type_dim();
        let h = d.seq_hidden;
        let seq_fw = match cfg.extractor {
            Extractor::Bi | Extractor::Fw => Some(LstmCellParams::new(store, "seq_lstm.fw", x, h, rng)?),
            Extractor::Bw => None,
        };
        let seq_bw = match cfg.extractor {
            Extractor::Bi | Extractor::Bw => Some(LstmCellParams::new(store, "seq_lstm.bw", x, h, rng)?),
            Extractor::Fw => None,
        };
        Ok(WordRepParams {
            word_emb,
            pos_emb,
            char_emb,
            char_fw,
            char_bw,
            seq_fw,
            seq_bw,
        })
    }

    /// Looks up handles in a store loaded from a model file.
    pub fn find<T: Scalar>(store: &ParameterStore<T>, cfg: &ReprConfig) -> Result<Self, AutodiffError> {
        let id = |name: &str| store.id(name).ok_or_else(|| AutodiffError::UnknownParam(name.to_owned()));
        let cell = |prefix: &str, on: bool| on.then(|| LstmCellParams::find(store, prefix)).transpose();
        let fw = matches!(cfg.extractor, Extractor::Bi | Extractor::Fw);
        let bw = matches!(cfg.extractor, Extractor::Bi | Extractor::Bw);
        Ok(WordRepParams {
            word_emb: id("word_emb")?,
            pos_emb: cfg.use_pos.then(|| id("pos_emb")).transpose()?,
            char_emb: cfg.use_char.then(|| id("char_emb")).transpose()?,
            char_fw: cell("char_lstm.fw", cfg.use_char)?,
            char_bw: cell("char_lstm.bw", cfg.use_char)?,
            seq_fw: cell("seq_lstm.fw", fw)?,
            seq_bw: cell("seq_lstm.bw", bw)?,
        })
    }
}

/// `x_i = e(w_i) ∘ p(w_i) ∘ [→LSTM(ch); ←LSTM(ch)]`, with disabled parts
/// left out.
pub fn type_vector<T: Scalar>(
    graph: &mut Graph<'_, T>,
    params: &WordRepParams,
    sentence: &EncodedSentence,
    i: usize,
) -> Result<Tensor, AutodiffError> {
    let mut parts = vec![graph.lookup(params.word_emb, sentence.words[i])?];
    if let Some(p) = params.pos_emb {
        parts.push(graph.lookup(p, sentence.upos[i])?);
    }
    if let (Some(emb), Some(fw), Some(bw)) = (params.char_emb, params.char_fw, params.char_bw) {
        let xs = sentence.chars[i]
            .iter()
            .map(|&c| graph.lookup(emb, c))
            .collect::<Result<Vec<_>, _>>()?;
        let forward = run_lstm(graph, &fw, &xs, Direction::Forward)?;
        let backward = run_lstm(graph, &bw, &xs, Direction::Backward)?;
        parts.push(forward[xs.len() - 1]);
        parts.push(backward[0]);
    }
    if parts.len() == 1 {
        return Ok(parts[0]);
    }
    graph.concat(&parts)
}

/// Token vectors `v_0..v_n` (root first). Repeated word types in one
/// sentence share a type vector node.
pub fn extract_tokens<T: Scalar>(
    graph: &mut Graph<'_, T>,
    params: &WordRepParams,
    sentence: &EncodedSentence,
) -> Result<Vec<Tensor>, AutodiffError> {
    let mut cache: HashMap<(usize, usize, &[usize]), Tensor> = HashMap::new();
    let mut xs = Vec::with_capacity(sentence.len());
    for i in 0..sentence.len() {
        let key = (sentence.words[i], sentence.upos[i], sentence.chars[i].as_slice());
        let x = match cache.get(&key) {
            Some(&x) => x,
            None => {
                let x = type_vector(graph, params, sentence, i)?;
                cache.insert(key, x);
                x
            }
        };
        xs.push(x);
    }
    token_vectors(graph, params, &xs)
}

/// Runs the sequence encoder(s) over given type vectors.
pub fn token_vectors<T: Scalar>(
    graph: &mut Graph<'_, T>,
    params: &WordRepParams,
    xs: &[Tensor],
) -> Result<Vec<Tensor>, AutodiffError> {
    let fw = params
        .seq_fw
        .map(|p| run_lstm(graph, &p, xs, Direction::Forward))
        .transpose()?;
    let bw = params
        .seq_bw
        .map(|p| run_lstm(graph, &p, xs, Direction::Backward))
        .transpose()?;
    match (fw, bw) {
        (Some(f), Some(b)) => f
            .into_iter()
            .zip(b)
            .map(|(f, b)| graph.concat(&[f, b]))
            .collect(),
        (Some(v), None) | (None, Some(v)) => Ok(v),
        (None, None) => unreachable!("every extractor has a sequence LSTM"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{parse_conllu, Token};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TWO: &str = "1\tdogs\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_\n2\tbark\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n";

    fn treebank(text: &str) -> Treebank {
        parse_conllu(text).unwrap()
    }

    #[test]
    fn min_count_one_indexes_all_words() {
        let v = build_vocab(&treebank(TWO), 1).unwrap();
        assert_eq!(v.words.len(), 4);
        assert_eq!(v.words.get("dogs"), Some(2));
        assert_eq!(v.words.get("bark"), Some(3));
    }

    #[test]
    fn rare_words_map_to_unknown() {
        let v = build_vocab(&treebank(TWO), 2).unwrap();
        assert_eq!(v.words.get_or_unk("dogs"), UNK);
        assert_eq!(v.words.len(), 2);
    }

    #[test]
    fn relations_are_direction_tagged() {
        let text = "1\ta\t_\tX\t_\t_\t2\tnsubj\t_\t_\n2\tb\t_\tX\t_\t_\t0\troot\t_\t_\n3\tc\t_\tX\t_\t_\t2\tobj:x\t_\t_\n\n";
        let v = build_vocab(&treebank(text), 1).unwrap();
        assert_eq!(v.n_labels(), 3);
        assert_eq!(v.n_relations(), 6);
        let mut tagged: Vec<usize> = (0..3)
            .flat_map(|l| [ArcDirection::Left, ArcDirection::Right].map(|d| v.relation(l, d)))
            .collect();
        tagged.sort();
        assert_eq!(tagged, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn empty_treebank_rejected() {
        let tb = Treebank::new("e", vec![]);
        assert_eq!(build_vocab(&tb, 1), Err(VocabError::EmptyTreebank));
    }

    #[test]
    fn root_has_reserved_indices() {
        let v = build_vocab(&treebank(TWO), 1).unwrap();
        let tb = treebank(TWO);
        let e = v.encode(&tb.sentences[0]);
        assert_eq!((e.words[0], e.upos[0], e.chars[0].as_slice()), (ROOT, ROOT, &[ROOT][..]));
        assert_ne!(ROOT, UNK);
    }

    #[test]
    fn dimension_arithmetic() {
        for &use_pos in &[false, true] {
            for &use_char in &[false, true] {
                for &extractor in Extractor::ALL {
                    let cfg = ReprConfig {
                        use_pos,
                        use_char,
                        extractor,
                        ..ReprConfig::default()
                    };
                    let x = 100 + if use_pos { 20 } else { 0 } + if use_char { 100 } else { 0 };
                    assert_eq!(cfg.type_dim(), x);
                    let v = if extractor == Extractor::Bi { 250 } else { 125 };
                    assert_eq!(cfg.token_dim(), v);
                    assert_eq!(cfg.feature_dim(), 3 * v);
                }
            }
        }
    }

    fn setup(cfg: &ReprConfig) -> (Vocabulary, ParameterStore<f64>, WordRepParams) {
        let vocab = build_vocab(&treebank(TWO), 1).unwrap();
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = WordRepParams::new(&mut store, &vocab, cfg, &mut rng).unwrap();
        (vocab, store, p)
    }

    #[test]
    fn word_only_type_vector_is_embedding() {
        let cfg = ReprConfig {
            use_pos: false,
            use_char: false,
            dims: Dims::tiny(),
            ..ReprConfig::default()
        };
        let (vocab, store, p) = setup(&cfg);
        let tb = treebank(TWO);
        let e = vocab.encode(&tb.sentences[0]);
        let mut g = Graph::new(&store);
        let x = type_vector(&mut g, &p, &e, 1).unwrap();
        assert_eq!(x.shape(), (cfg.dims.word, 1));
        let row = e.words[1] * cfg.dims.word;
        assert_eq!(g.value(x), &store.param(p.word_emb).value[row..row + cfg.dims.word]);
    }

    #[test]
    fn repeated_type_gives_identical_vector() {
        let cfg = ReprConfig {
            dims: Dims::tiny(),
            ..ReprConfig::default()
        };
        let (vocab, store, p) = setup(&cfg);
        let mut s = Sentence::default();
        for (i, w) in ["dogs", "bark", "dogs"].iter().enumerate() {
            s.tokens.push(Token::new(i + 1, *w).with_upos("NOUN"));
        }
        let e = vocab.encode(&s);
        let mut g = Graph::new(&store);
        let a = type_vector(&mut g, &p, &e, 1).unwrap();
        let b = type_vector(&mut g, &p, &e, 3).unwrap();
        assert_eq!(g.value(a), g.value(b));
        assert_eq!(a.shape(), (cfg.type_dim(), 1));
    }

    #[test]
    fn one_token_per_position_plus_root() {
        for &extractor in Extractor::ALL {
            let cfg = ReprConfig {
                extractor,
                dims: Dims::tiny(),
                ..ReprConfig::default()
            };
            let (vocab, store, p) = setup(&cfg);
            let tb = treebank(TWO);
            let e = vocab.encode(&tb.sentences[0]);
            let mut g = Graph::new(&store);
            let vs = extract_tokens(&mut g, &p, &e).unwrap();
            assert_eq!(vs.len(), 3);
            assert!(vs.iter().all(|v| v.shape() == (cfg.token_dim(), 1)));
        }
    }

    #[test]
    fn dropout_spares_root_and_respects_zero_alpha() {
        let vocab = build_vocab(&treebank(TWO), 1).unwrap();
        let tb = treebank(TWO);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut e = vocab.encode(&tb.sentences[0]);
        let before = e.clone();
        e.drop_words(&vocab, 0.0, &mut rng);
        assert_eq!(e, before);
        e.drop_words(&vocab, 1e12, &mut rng);
        assert_eq!(e.words, vec![ROOT, UNK, UNK]);
    }

    #[test]
    fn pairs_round_trip() {
        let cfg = ReprConfig {
            use_char: false,
            extractor: Extractor::Bw,
            composition: Composition::Lc,
            dims: Dims::tiny(),
            ..ReprConfig::default()
        };
        let mut back = ReprConfig::default();
        for (k, v) in cfg.to_pairs() {
            assert!(back.set(k, &v).unwrap());
        }
        assert_eq!(back, cfg);
        assert!(!back.set("epochs", "3").unwrap());
        assert!(back.set("word_dim", "0").is_err());
    }

    #[test]
    fn keywords_round_trip() {
        for &c in Composition::ALL {
            assert_eq!(c.name().parse::<Composition>().unwrap(), c);
        }
        assert!("xx".parse::<Extractor>().is_err());
    }
}
