//! Reparsing ensemble: every parser votes for its arcs, and the maximum
//! spanning arborescence of the vote matrix (Chu-Liu-Edmonds) is the
//! ensemble tree. Labels are ignored by the tree search and assigned
//! afterwards by majority.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::conllu::{Sentence, Treebank};
use crate::eval::{score_trees, EvalError, Score};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnsembleError {
    #[error("no input trees")]
    NoInput,
    #[error("tree {index} has {got} tokens, expected {expected}")]
    LengthMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("tree {index}, token {token}: head {head} out of range")]
    BadHead {
        index: usize,
        token: usize,
        head: usize,
    },
    #[error("prediction {index}, sentence {sentence}: missing head")]
    MissingHead { index: usize, sentence: usize },
    #[error("predictions have {got} sentences, expected {expected}")]
    SentenceCount { got: usize, expected: usize },
    #[error("ablate-one needs at least two systems")]
    TooFewForAblation,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `votes[h][d]`: number of parsers attaching `d` to `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcVoteMatrix {
    pub n: usize,
    pub votes: Vec<Vec<u32>>,
}

impl ArcVoteMatrix {
    pub fn zeros(n: usize) -> Self {
        ArcVoteMatrix {
            n,
            votes: vec![vec![0; n + 1]; n + 1],
        }
    }

    /// Sum of votes over the arcs of a head array.
    pub fn weight(&self, heads: &[usize]) -> u64 {
        (1..=self.n).map(|d| self.votes[heads[d]][d] as u64).sum()
    }
}

/// Counts arcs. Head arrays are indexed by position with an unused slot 0.
pub fn collect_votes(trees: &[Vec<usize>]) -> Result<ArcVoteMatrix, EnsembleError> {
    let first = trees.first().ok_or(EnsembleError::NoInput)?;
    let n = first.len().saturating_sub(1);
    let mut m = ArcVoteMatrix::zeros(n);
    for (index, t) in trees.iter().enumerate() {
        if t.len() != n + 1 {
            return Err(EnsembleError::LengthMismatch {
                index,
                got: t.len().saturating_sub(1),
                expected: n,
            });
        }
        for d in 1..=n {
            let head = t[d];
            if head > n || head == d {
                return Err(EnsembleError::BadHead { index, token: d, head });
            }
            m.votes[head][d] += 1;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    w: i64,
    /// Original endpoints, used for tie-breaking.
    h: usize,
    d: usize,
}

/// Higher weight, then lower head index, then shorter arc.
fn better(a: &Edge, b: &Edge) -> bool {
    (a.w, std::cmp::Reverse(a.h), std::cmp::Reverse(a.h.abs_diff(a.d)))
        > (b.w, std::cmp::Reverse(b.h), std::cmp::Reverse(b.h.abs_diff(b.d)))
}

fn pick(slot: &mut Option<Edge>, e: Edge) -> bool {
    if slot.is_none_or(|cur| better(&e, &cur)) {
        *slot = Some(e);
        true
    } else {
        false
    }
}

/// Maximum arborescence rooted at 0 over `g[h][d]`; returns parents.
fn arborescence(g: &[Vec<Option<Edge>>]) -> Vec<usize> {
    let m = g.len();
    let mut best: Vec<Option<Edge>> = vec![None; m];
    let mut parent = vec![0; m];
    for d in 1..m {
        for h in 0..m {
            if h != d {
                if let Some(e) = g[h][d] {
                    if pick(&mut best[d], e) {
                        parent[d] = h;
                    }
                }
            }
        }
    }

    // find a cycle among the chosen edges
    let mut color = vec![0u8; m];
    let mut cycle = Vec::new();
    'outer: for start in 1..m {
        let mut path = Vec::new();
        let mut v = start;
        while v != 0 && color[v] == 0 {
            color[v] = 1;
            path.push(v);
            v = parent[v];
        }
        if v != 0 && color[v] == 1 {
            let at = path.iter().position(|&x| x == v).expect("on path");
            cycle = path[at..].to_vec();
            break 'outer;
        }
        for &p in &path {
            color[p] = 2;
        }
    }
    if cycle.is_empty() {
        return parent;
    }

    let mut in_cycle = vec![false; m];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    let mut map = vec![usize::MAX; m];
    let mut unmap = Vec::new();
    for v in 0..m {
        if !in_cycle[v] {
            map[v] = unmap.len();
            unmap.push(v);
        }
    }
    let c = unmap.len();
    let k = c + 1;
    let mut g2: Vec<Vec<Option<Edge>>> = vec![vec![None; k]; k];
    let mut enters = vec![0; k];
    let mut leaves = vec![0; k];
    for h in 0..m {
        for d in 1..m {
            let Some(e) = g[h][d] else { continue };
            if h == d {
                continue;
            }
            match (in_cycle[h], in_cycle[d]) {
                (false, false) => g2[map[h]][map[d]] = Some(e),
                (false, true) => {
                    let adjusted = Edge {
                        w: e.w - best[d].expect("cycle node has an edge").w,
                        ..e
                    };
                    if pick(&mut g2[map[h]][c], adjusted) {
                        enters[map[h]] = d;
                    }
                }
                (true, false) => {
                    if pick(&mut g2[c][map[d]], e) {
                        leaves[map[d]] = h;
                    }
                }
                (true, true) => {}
            }
        }
    }

    let sub = arborescence(&g2);
    let mut out = parent;
    for v in 1..m {
        if in_cycle[v] {
            continue;
        }
        let p = sub[map[v]];
        out[v] = if p == c { leaves[map[v]] } else { unmap[p] };
    }
    let from = sub[c];
    out[enters[from]] = unmap[from];
    out
}

/// Maximum spanning arborescence of the vote matrix. Returns a head array
/// with an unused slot 0. With `single_root`, node 0 gets exactly one
/// dependent.
pub fn cle_mst(weights: &ArcVoteMatrix, single_root: bool) -> Vec<usize> {
    let n = weights.n;
    let total: i64 = weights.votes.iter().flatten().map(|&v| v as i64).sum();
    let penalty = if single_root { total + 1 } else { 0 };
    let g: Vec<Vec<Option<Edge>>> = (0..=n)
        .map(|h| {
            (0..=n)
                .map(|d| {
                    (d != 0 && d != h).then(|| Edge {
                        w: weights.votes[h][d] as i64 - if h == 0 { penalty } else { 0 },
                        h,
                        d,
                    })
                })
                .collect()
        })
        .collect();
    let mut heads = arborescence(&g);
    heads[0] = 0;
    heads
}

/// Combines parses of one sentence: MST over head votes, then for each
/// dependent the most frequent label among parsers that chose the winning
/// head (lexicographically first on ties).
pub fn combine(preds: &[&Sentence], single_root: bool) -> Result<Sentence, EnsembleError> {
    let first = preds.first().ok_or(EnsembleError::NoInput)?;
    let trees = preds
        .iter()
        .enumerate()
        .map(|(i, s)| s.heads().ok_or(EnsembleError::MissingHead { index: i, sentence: 0 }))
        .collect::<Result<Vec<_>, _>>()?;
    let votes = collect_votes(&trees)?;
    let heads = cle_mst(&votes, single_root);
    let mut out = (*first).clone();
    let arcs: Vec<(usize, String)> = (1..=votes.n)
        .map(|d| {
            let mut winners: BTreeMap<&str, usize> = BTreeMap::new();
            let mut all: BTreeMap<&str, usize> = BTreeMap::new();
            for (s, t) in preds.iter().zip(&trees) {
                let label = s.tokens[d - 1].deprel.as_deref().unwrap_or("_");
                *all.entry(label).or_default() += 1;
                if t[d] == heads[d] {
                    *winners.entry(label).or_default() += 1;
                }
            }
            let pool = if winners.is_empty() { &all } else { &winners };
            // BTreeMap iterates in label order, so the first maximum wins ties
            let mut label = "";
            let mut top = 0;
            for (&l, &c) in pool {
                if c > top {
                    label = l;
                    top = c;
                }
            }
            (heads[d], label.to_owned())
        })
        .collect();
    out.set_arcs(&arcs);
    Ok(out)
}

/// Sentence-by-sentence [`combine`] over aligned predicted treebanks.
pub fn ensemble_treebank(preds: &[&Treebank], single_root: bool) -> Result<Treebank, EnsembleError> {
    let first = preds.first().ok_or(EnsembleError::NoInput)?;
    for p in preds {
        if p.len() != first.len() {
            return Err(EnsembleError::SentenceCount {
                got: p.len(),
                expected: first.len(),
            });
        }
    }
    let sentences = (0..first.len())
        .map(|i| {
            let column: Vec<&Sentence> = preds.iter().map(|p| &p.sentences[i]).collect();
            combine(&column, single_root).map_err(|e| match e {
                EnsembleError::MissingHead { index, .. } => EnsembleError::MissingHead {
                    index,
                    sentence: i + 1,
                },
                e => e,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(Treebank::new(first.name.clone(), sentences))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    /// `full`, or `-name` for the ensemble without system `name`.
    pub name: String,
    pub score: Score,
}

/// The full ensemble plus one ensemble per left-out system, scored
/// against `gold`.
pub fn ablate_one(
    gold: &Treebank,
    systems: &[(String, Treebank)],
    single_root: bool,
) -> Result<Vec<EnsembleRow>, EnsembleError> {
    if systems.len() < 2 {
        return Err(EnsembleError::TooFewForAblation);
    }
    let run = |skip: Option<usize>| -> Result<Score, EnsembleError> {
        let preds: Vec<&Treebank> = systems
            .iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != skip)
            .map(|(_, (_, tb))| tb)
            .collect();
        Ok(score_trees(gold, &ensemble_treebank(&preds, single_root)?)?)
    };
    let mut rows = vec![EnsembleRow {
        name: "full".to_owned(),
        score: run(None)?,
    }];
    for (i, (name, _)) in systems.iter().enumerate() {
        rows.push(EnsembleRow {
            name: format!("-{name}"),
            score: run(Some(i))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::Token;

    #[test]
    fn one_tree_gives_unit_columns() {
        let m = collect_votes(&[vec![0, 2, 0, 2]]).unwrap();
        for d in 1..=3 {
            assert_eq!((0..=3).map(|h| m.votes[h][d]).sum::<u32>(), 1);
        }
        assert_eq!(m.votes[2][1], 1);
    }

    #[test]
    fn counting_example() {
        let m = collect_votes(&[vec![0, 0, 1], vec![0, 0, 1], vec![0, 2, 0]]).unwrap();
        assert_eq!(m.votes[0][1], 2);
        assert_eq!(m.votes[2][1], 1);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            collect_votes(&[vec![0, 0], vec![0, 0, 1]]),
            Err(EnsembleError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_token() {
        let m = collect_votes(&[vec![0, 0]]).unwrap();
        assert_eq!(cle_mst(&m, false), vec![0, 0]);
    }

    #[test]
    fn unanimous_tree_returned() {
        let t = vec![0, 3, 1, 0, 3, 4];
        let m = collect_votes(&vec![t.clone(); 6]).unwrap();
        assert_eq!(cle_mst(&m, false), t);
    }

    #[test]
    fn breaks_a_voted_cycle() {
        // 1 and 2 vote for each other; root edge to 2 is the cheapest fix
        let mut m = ArcVoteMatrix::zeros(2);
        m.votes[2][1] = 3;
        m.votes[1][2] = 2;
        m.votes[0][2] = 1;
        assert_eq!(cle_mst(&m, false), vec![0, 2, 0]);
    }

    #[test]
    fn single_root_penalty() {
        let m = collect_votes(&[vec![0, 0, 0, 0]]).unwrap();
        let heads = cle_mst(&m, true);
        assert_eq!(heads[1..].iter().filter(|&&h| h == 0).count(), 1);
        assert_eq!(cle_mst(&m, false), vec![0, 0, 0, 0]);
    }

    fn sentence(arcs: &[(usize, &str)]) -> Sentence {
        Sentence::new(
            arcs.iter()
                .enumerate()
                .map(|(i, &(h, l))| Token::new(i + 1, "w").with_head(h, l))
                .collect(),
        )
    }

    #[test]
    fn majority_label_with_tie_break() {
        let a = sentence(&[(0, "root"), (1, "obj")]);
        let b = sentence(&[(0, "root"), (1, "iobj")]);
        let c = sentence(&[(0, "root"), (1, "obj")]);
        let out = combine(&[&a, &b, &c], false).unwrap();
        assert_eq!(out.tokens[1].deprel.as_deref(), Some("obj"));
        let out = combine(&[&a, &b], false).unwrap();
        assert_eq!(out.tokens[1].deprel.as_deref(), Some("iobj"));
    }

    #[test]
    fn ablation_has_one_row_per_system_plus_full() {
        let gold = Treebank::new("g", vec![sentence(&[(0, "root"), (1, "obj")])]);
        let systems: Vec<(String, Treebank)> = (0..6).map(|i| (format!("m{i}"), gold.clone())).collect();
        let rows = ablate_one(&gold, &systems, false).unwrap();
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[0].name, "full");
        assert_eq!(rows[3].name, "-m2");
        assert!(rows.iter().all(|r| r.score.uas == 1.0));
        assert_eq!(
            ablate_one(&gold, &systems[..1], false),
            Err(EnsembleError::TooFewForAblation)
        );
    }
}
