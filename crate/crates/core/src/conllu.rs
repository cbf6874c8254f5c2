//! CoNLL-U reading and writing, plus the treebank-level statistics used for
//! correlating parser behaviour with word-order properties.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("sentence {sentence}, line {line}: {kind}")]
pub struct ConlluError {
    /// 1-based ordinal of the sentence in the input.
    pub sentence: usize,
    /// 1-based line number in the input.
    pub line: usize,
    pub kind: ConlluErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConlluErrorKind {
    #[error("expected 10 tab-separated columns, found {0}")]
    ColumnCount(usize),
    #[error("invalid token id {0:?}")]
    InvalidId(String),
    #[error("expected token id {expected}, found {found}")]
    NonConsecutiveId { expected: usize, found: usize },
    #[error("non-integer head {0:?}")]
    NonIntegerHead(String),
    #[error("head {head} out of range for sentence of length {len}")]
    HeadOutOfRange { head: usize, len: usize },
    #[error("missing dependency relation for attached token")]
    MissingDeprel,
    #[error("cyclic tree")]
    CyclicTree,
}

/// A syntactic word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub upos: Option<String>,
    /// Gold (or predicted) head; 0 is the artificial root.
    pub head: Option<usize>,
    pub deprel: Option<String>,
}

impl Token {
    pub fn new(id: usize, form: impl Into<String>) -> Self {
        Token {
            id,
            form: form.into(),
            upos: None,
            head: None,
            deprel: None,
        }
    }

    pub fn with_upos(mut self, upos: impl Into<String>) -> Self {
        self.upos = Some(upos.into());
        self
    }

    pub fn with_head(mut self, head: usize, deprel: impl Into<String>) -> Self {
        self.head = Some(head);
        self.deprel = Some(deprel.into());
        self
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.form.chars()
    }

    /// Relation label with any subtype (`nmod:poss` → `nmod`) removed.
    pub fn base_deprel(&self) -> Option<&str> {
        self.deprel.as_deref().map(base_relation)
    }
}

/// Truncates a relation label at the first `:`.
pub fn base_relation(label: &str) -> &str {
    label.split(':').next().unwrap_or(label)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    /// Comment lines including the leading `#`.
    pub comments: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence {
            tokens,
            comments: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Heads indexed by position, with a placeholder 0 at index 0 for the
    /// root. Returns `None` if any token lacks a head.
    pub fn heads(&self) -> Option<Vec<usize>> {
        let mut heads = Vec::with_capacity(self.len() + 1);
        heads.push(0);
        for token in &self.tokens {
            heads.push(token.head?);
        }
        Some(heads)
    }

    pub fn has_tree(&self) -> bool {
        self.tokens.iter().all(|t| t.head.is_some())
    }

    /// Replaces heads and labels, e.g. with parser output.
    pub fn set_arcs(&mut self, arcs: &[(usize, String)]) {
        assert_eq!(arcs.len(), self.len(), "one arc per token");
        for (token, (head, label)) in self.tokens.iter_mut().zip(arcs) {
            token.head = Some(*head);
            token.deprel = Some(label.clone());
        }
    }
}

/// Checks that a head vector (index 0 unused) forms a tree rooted at 0.
/// Returns the first position found on a cycle otherwise.
pub fn find_cycle(heads: &[usize]) -> Option<usize> {
    let n = heads.len().saturating_sub(1);
    // 0 = unvisited, 1 = on current path, 2 = known to reach root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut cur = start;
        while state[cur] == 0 {
            state[cur] = 1;
            path.push(cur);
            cur = heads[cur];
            if cur > n {
                return Some(start);
            }
        }
        if state[cur] == 1 {
            return Some(cur);
        }
        for p in path {
            state[p] = 2;
        }
    }
    None
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Treebank {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Treebank {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Treebank {
            name: name.into(),
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// Parses CoNLL-U text. Multiword-token ranges (`3-4`) and empty nodes
/// (`5.1`) are skipped. A single-root constraint is not imposed, so parser
/// output with several root attachments can be read back.
pub fn parse_conllu(text: &str) -> Result<Treebank, ConlluError> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut token_lines = Vec::new();
    let mut first_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !current.tokens.is_empty() || !current.comments.is_empty() {
                let ordinal = sentences.len() + 1;
                finish_sentence(&current, &token_lines, ordinal, first_line)?;
                sentences.push(std::mem::take(&mut current));
                token_lines.clear();
            }
            continue;
        }
        if current.tokens.is_empty() && current.comments.is_empty() {
            first_line = line_no;
        }
        let ordinal = sentences.len() + 1;
        let err = |kind| ConlluError {
            sentence: ordinal,
            line: line_no,
            kind,
        };

        if line.starts_with('#') {
            current.comments.push(line.to_owned());
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(err(ConlluErrorKind::ColumnCount(cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| err(ConlluErrorKind::InvalidId(cols[0].to_owned())))?;
        let expected = current.tokens.len() + 1;
        if id != expected {
            return Err(err(ConlluErrorKind::NonConsecutiveId {
                expected,
                found: id,
            }));
        }
        let head = match cols[6] {
            "_" => None,
            h => Some(
                h.parse::<usize>()
                    .map_err(|_| err(ConlluErrorKind::NonIntegerHead(h.to_owned())))?,
            ),
        };
        let deprel = optional(cols[7]);
        if head.is_some() && deprel.is_none() {
            return Err(err(ConlluErrorKind::MissingDeprel));
        }
        current.tokens.push(Token {
            id,
            form: cols[1].to_owned(),
            upos: optional(cols[3]),
            head,
            deprel,
        });
        token_lines.push(line_no);
    }

    if !current.tokens.is_empty() || !current.comments.is_empty() {
        let ordinal = sentences.len() + 1;
        finish_sentence(&current, &token_lines, ordinal, first_line)?;
        sentences.push(current);
    }

    Ok(Treebank {
        name: String::new(),
        sentences,
    })
}

fn optional(col: &str) -> Option<String> {
    (col != "_").then(|| col.to_owned())
}

fn finish_sentence(
    sentence: &Sentence,
    token_lines: &[usize],
    ordinal: usize,
    first_line: usize,
) -> Result<(), ConlluError> {
    let n = sentence.len();
    for (token, &line) in sentence.tokens.iter().zip(token_lines) {
        if let Some(head) = token.head {
            if head > n {
                return Err(ConlluError {
                    sentence: ordinal,
                    line,
                    kind: ConlluErrorKind::HeadOutOfRange { head, len: n },
                });
            }
        }
    }
    if let Some(heads) = sentence.heads() {
        if let Some(pos) = find_cycle(&heads) {
            return Err(ConlluError {
                sentence: ordinal,
                line: token_lines.get(pos - 1).copied().unwrap_or(first_line),
                kind: ConlluErrorKind::CyclicTree,
            });
        }
    }
    Ok(())
}

/// Writes CoNLL-U. Columns that are not retained (LEMMA, XPOS, FEATS, DEPS,
/// MISC) are emitted as `_`.
pub fn write_conllu(tb: &Treebank) -> String {
    let mut out = String::new();
    for sentence in &tb.sentences {
        for comment in &sentence.comments {
            out.push_str(comment);
            out.push('\n');
        }
        for token in &sentence.tokens {
            let head = token
                .head
                .map(|h| h.to_string())
                .unwrap_or_else(|| "_".to_owned());
            let _ = writeln!(
                out,
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_",
                token.id,
                token.form,
                token.upos.as_deref().unwrap_or("_"),
                head,
                token.deprel.as_deref().unwrap_or("_"),
            );
        }
        out.push('\n');
    }
    out
}

/// Relations counted as holding between content words. Function-word
/// relations (aux, cop, mark, det, clf, case, cc, punct, dep) and `root`
/// are excluded.
pub const DEFAULT_CONTENT_RELATIONS: &[&str] = &[
    "nsubj",
    "obj",
    "iobj",
    "csubj",
    "ccomp",
    "xcomp",
    "obl",
    "vocative",
    "expl",
    "dislocated",
    "advcl",
    "advmod",
    "discourse",
    "nmod",
    "appos",
    "nummod",
    "acl",
    "amod",
    "conj",
    "fixed",
    "flat",
    "compound",
    "list",
    "parataxis",
    "orphan",
    "goeswith",
    "reparandum",
];

pub fn default_content_relations() -> BTreeSet<String> {
    DEFAULT_CONTENT_RELATIONS
        .iter()
        .map(|s| (*s).to_owned())
        .collect()
}

/// Raw counts behind [`TreebankStats`]; kept so that statistics of
/// concatenated treebanks can be combined exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatCounts {
    pub sentences: usize,
    pub tokens: usize,
    /// Arcs including root attachments.
    pub arcs: usize,
    pub non_root_arcs: usize,
    pub content_arcs: usize,
    pub right_headed_content_arcs: usize,
    pub dependency_length_sum: usize,
    pub depth_sum: usize,
    pub crossed_arcs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreebankStats {
    /// Share of content relations whose head follows the dependent; absent
    /// when the treebank has no content relations.
    pub right_headedness: Option<f64>,
    pub left_headedness: Option<f64>,
    pub avg_dependency_length: f64,
    pub avg_sentence_length: f64,
    pub avg_arc_depth: f64,
    pub nonprojective_arc_fraction: f64,
    pub counts: StatCounts,
}

impl TreebankStats {
    pub fn from_counts(c: StatCounts) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let right = (c.content_arcs > 0).then(|| ratio(c.right_headed_content_arcs, c.content_arcs));
        TreebankStats {
            right_headedness: right,
            left_headedness: right.map(|r| 1.0 - r),
            avg_dependency_length: ratio(c.dependency_length_sum, c.non_root_arcs),
            avg_sentence_length: ratio(c.tokens, c.sentences),
            avg_arc_depth: ratio(c.depth_sum, c.tokens),
            nonprojective_arc_fraction: ratio(c.crossed_arcs, c.arcs),
            counts: c,
        }
    }
}

impl std::ops::Add for StatCounts {
    type Output = StatCounts;

    fn add(self, o: StatCounts) -> StatCounts {
        StatCounts {
            sentences: self.sentences + o.sentences,
            tokens: self.tokens + o.tokens,
            arcs: self.arcs + o.arcs,
            non_root_arcs: self.non_root_arcs + o.non_root_arcs,
            content_arcs: self.content_arcs + o.content_arcs,
            right_headed_content_arcs: self.right_headed_content_arcs
                + o.right_headed_content_arcs,
            dependency_length_sum: self.dependency_length_sum + o.dependency_length_sum,
            depth_sum: self.depth_sum + o.depth_sum,
            crossed_arcs: self.crossed_arcs + o.crossed_arcs,
        }
    }
}

/// Depth of every position in a head vector (root 0 has depth 0).
pub fn arc_depths(heads: &[usize]) -> Vec<usize> {
    let n = heads.len() - 1;
    let mut depth = vec![usize::MAX; n + 1];
    depth[0] = 0;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut cur = start;
        while depth[cur] == usize::MAX {
            path.push(cur);
            cur = heads[cur];
        }
        let mut d = depth[cur];
        for &p in path.iter().rev() {
            d += 1;
            depth[p] = d;
        }
    }
    depth
}

/// Marks arcs (indexed by dependent) crossed by at least one other arc. The
/// artificial root sits at position 0.
pub fn crossed_arcs(heads: &[usize]) -> Vec<bool> {
    let n = heads.len() - 1;
    let span = |d: usize| {
        let h = heads[d];
        (h.min(d), h.max(d))
    };
    let mut crossed = vec![false; n + 1];
    for a in 1..=n {
        let (l1, r1) = span(a);
        for b in (a + 1)..=n {
            let (l2, r2) = span(b);
            if (l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1) {
                crossed[a] = true;
                crossed[b] = true;
            }
        }
    }
    crossed
}

pub fn sentence_counts(sentence: &Sentence, content_relations: &BTreeSet<String>) -> StatCounts {
    let mut c = StatCounts {
        sentences: 1,
        tokens: sentence.len(),
        ..StatCounts::default()
    };
    let heads = match sentence.heads() {
        Some(h) => h,
        None => return c,
    };
    c.arcs = sentence.len();
    for token in &sentence.tokens {
        let head = heads[token.id];
        if head != 0 {
            c.non_root_arcs += 1;
            c.dependency_length_sum += head.abs_diff(token.id);
        }
        let label = token.base_deprel().unwrap_or("");
        if content_relations.contains(label) {
            c.content_arcs += 1;
            if head > token.id {
                c.right_headed_content_arcs += 1;
            }
        }
    }
    c.depth_sum = arc_depths(&heads)[1..].iter().sum();
    c.crossed_arcs = crossed_arcs(&heads)[1..].iter().filter(|&&x| x).count();
    c
}

/// Computes word-order statistics. Content relations are compared after
/// subtype truncation; length and depth statistics include every token.
pub fn treebank_stats(tb: &Treebank, content_relations: &BTreeSet<String>) -> TreebankStats {
    let counts = tb
        .sentences
        .iter()
        .map(|s| sentence_counts(s, content_relations))
        .fold(StatCounts::default(), |a, b| a + b);
    TreebankStats::from_counts(counts)
}
