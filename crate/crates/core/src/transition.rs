//! Arc-hybrid transitions extended with SWAP, and a static-dynamic oracle.
//!
//! The root sits at the bottom of the stack from the start. SWAP moves the
//! stack top back into the buffer, right behind the buffer front, which lets
//! the parser build non-projective trees.
//!
//! Training runs the system under a *static swap discipline*: whenever the
//! stack top comes after the buffer front in the projective order of the
//! gold tree, SWAP is the only zero-cost move, and otherwise SWAP is never
//! correct. Under that discipline the remaining (SHIFT, LEFT-ARC, RIGHT-ARC)
//! costs are exact: each counts the gold arcs that become unreachable.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionKind {
    Shift,
    Swap,
    LeftArc,
    RightArc,
}

impl TransitionKind {
    pub fn name(self) -> &'static str {
        match self {
            TransitionKind::Shift => "SHIFT",
            TransitionKind::Swap => "SWAP",
            TransitionKind::LeftArc => "LEFT_ARC",
            TransitionKind::RightArc => "RIGHT_ARC",
        }
    }
}

/// A transition; arc transitions carry a relation label index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    Shift,
    Swap,
    LeftArc(usize),
    RightArc(usize),
}

impl Transition {
    pub fn kind(self) -> TransitionKind {
        match self {
            Transition::Shift => TransitionKind::Shift,
            Transition::Swap => TransitionKind::Swap,
            Transition::LeftArc(_) => TransitionKind::LeftArc,
            Transition::RightArc(_) => TransitionKind::RightArc,
        }
    }

    pub fn label(self) -> Option<usize> {
        match self {
            Transition::LeftArc(l) | Transition::RightArc(l) => Some(l),
            _ => None,
        }
    }

    /// Unlabeled representative of a kind (label 0 for arcs).
    pub fn of_kind(kind: TransitionKind) -> Self {
        match kind {
            TransitionKind::Shift => Transition::Shift,
            TransitionKind::Swap => Transition::Swap,
            TransitionKind::LeftArc => Transition::LeftArc(0),
            TransitionKind::RightArc => Transition::RightArc(0),
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.label() {
            Some(l) => write!(f, "{}({})", self.kind().name(), l),
            None => f.write_str(self.kind().name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("a configuration needs at least one token")]
    EmptySentence,
    #[error("{transition} is illegal: {reason}")]
    Illegal {
        transition: Transition,
        reason: &'static str,
    },
}

/// An arc created by a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub head: usize,
    pub label: usize,
    pub dependent: usize,
}

/// Parser state over positions `0..=n`, 0 being the artificial root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    stack: Vec<usize>,
    buffer: VecDeque<usize>,
    heads: Vec<Option<usize>>,
    labels: Vec<Option<usize>>,
}

impl Configuration {
    /// Stack `[0]`, buffer `[1..=n]`, no arcs.
    pub fn initial(n: usize) -> Result<Self, TransitionError> {
        if n == 0 {
            return Err(TransitionError::EmptySentence);
        }
        Ok(Configuration {
            stack: vec![0],
            buffer: (1..=n).collect(),
            heads: vec![None; n + 1],
            labels: vec![None; n + 1],
        })
    }

    /// Builds an arbitrary configuration (for tests and tools). Arcs are
    /// `(head, label, dependent)`.
    pub fn from_parts(n: usize, stack: Vec<usize>, buffer: Vec<usize>, arcs: &[(usize, usize, usize)]) -> Self {
        let mut heads = vec![None; n + 1];
        let mut labels = vec![None; n + 1];
        for &(h, l, d) in arcs {
            heads[d] = Some(h);
            labels[d] = Some(l);
        }
        Configuration {
            stack,
            buffer: buffer.into(),
            heads,
            labels,
        }
    }

    pub fn sentence_len(&self) -> usize {
        self.heads.len() - 1
    }

    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    pub fn buffer(&self) -> &VecDeque<usize> {
        &self.buffer
    }

    /// Stack item `i` from the top (`0` is the top).
    pub fn stack_top(&self, i: usize) -> Option<usize> {
        self.stack.len().checked_sub(i + 1).map(|k| self.stack[k])
    }

    pub fn buffer_front(&self) -> Option<usize> {
        self.buffer.front().copied()
    }

    pub fn head(&self, dependent: usize) -> Option<usize> {
        self.heads[dependent]
    }

    pub fn label(&self, dependent: usize) -> Option<usize> {
        self.labels[dependent]
    }

    pub fn arcs(&self) -> Vec<Arc> {
        (1..self.heads.len())
            .filter_map(|d| {
                Some(Arc {
                    head: self.heads[d]?,
                    label: self.labels[d]?,
                    dependent: d,
                })
            })
            .collect()
    }

    pub fn is_terminal(&self) -> bool {
        self.buffer.is_empty() && self.stack == [0]
    }

    /// Upper bound on the number of transitions from the initial
    /// configuration; SWAP's order condition keeps sequences quadratic.
    pub fn step_cap(n: usize) -> usize {
        n * n + 4 * n
    }

    fn violation(&self, t: Transition) -> Option<&'static str> {
        let s0 = self.stack_top(0);
        let b0 = self.buffer_front();
        match t {
            Transition::Shift => b0.is_none().then_some("buffer is empty"),
            Transition::LeftArc(_) => match (s0, b0) {
                (_, None) => Some("buffer is empty"),
                (None, _) => Some("stack is empty"),
                (Some(0), _) => Some("root cannot be a dependent"),
                _ => None,
            },
            Transition::RightArc(_) => (self.stack.len() < 2).then_some("stack has fewer than two items"),
            Transition::Swap => match (s0, b0) {
                (_, None) => Some("buffer is empty"),
                (None, _) | (Some(0), _) => Some("stack top is the root"),
                (Some(s), Some(b)) if s > b => Some("stack top does not precede the buffer front"),
                _ => None,
            },
        }
    }

    pub fn is_legal(&self, t: Transition) -> bool {
        self.violation(t).is_none()
    }

    /// Applies `t`, returning the arc it created, if any.
    pub fn apply(&mut self, t: Transition) -> Result<Option<Arc>, TransitionError> {
        if let Some(reason) = self.violation(t) {
            return Err(TransitionError::Illegal { transition: t, reason });
        }
        let arc = match t {
            Transition::Shift => {
                let b = self.buffer.pop_front().expect("checked");
                self.stack.push(b);
                None
            }
            Transition::Swap => {
                let s = self.stack.pop().expect("checked");
                self.buffer.insert(1, s);
                None
            }
            Transition::LeftArc(label) => {
                let dependent = self.stack.pop().expect("checked");
                let head = self.buffer[0];
                Some(Arc { head, label, dependent })
            }
            Transition::RightArc(label) => {
                let dependent = self.stack.pop().expect("checked");
                let head = *self.stack.last().expect("checked");
                Some(Arc { head, label, dependent })
            }
        };
        if let Some(a) = arc {
            self.heads[a.dependent] = Some(a.head);
            self.labels[a.dependent] = Some(a.label);
        }
        Ok(arc)
    }

    pub fn applied(&self, t: Transition) -> Result<Configuration, TransitionError> {
        let mut c = self.clone();
        c.apply(t)?;
        Ok(c)
    }

    /// Every position is on the stack, in the buffer, or attached, and
    /// exactly one of these.
    pub fn is_partition(&self) -> bool {
        let n = self.sentence_len();
        let mut seen = vec![0u8; n + 1];
        for &p in self.stack.iter().chain(self.buffer.iter()) {
            if p > n {
                return false;
            }
            seen[p] += 1;
        }
        for d in 1..=n {
            if self.heads[d].is_some() {
                seen[d] += 1;
            }
        }
        seen[0] == 1 && self.heads[0].is_none() && seen.iter().all(|&c| c == 1)
    }
}

/// Rank of each position in the projective order of a gold tree: in-order
/// traversal where a head is visited in its surface slot among its
/// dependents. `heads[0]` is ignored; the root gets rank 0.
pub fn projective_order(heads: &[usize]) -> Vec<usize> {
    let n = heads.len() - 1;
    let mut deps = vec![Vec::new(); n + 1];
    for d in 1..=n {
        deps[heads[d]].push(d);
    }
    let mut rank = vec![0; n + 1];
    let mut next = 0;
    // (node, expanded)
    let mut stack = vec![(0usize, false)];
    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            rank[node] = next;
            next += 1;
            continue;
        }
        // push in reverse visiting order
        for &d in deps[node].iter().rev().filter(|&&d| d > node) {
            stack.push((d, false));
        }
        stack.push((node, true));
        for &d in deps[node].iter().rev().filter(|&&d| d < node) {
            stack.push((d, false));
        }
    }
    rank
}

pub const INFINITE_COST: u32 = u32::MAX;

/// Costs of the four transition kinds in one configuration. `None` marks an
/// illegal transition. Arc costs are unlabeled; a labeled arc costs one more
/// when it attaches a dependent to its gold head with a wrong label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    pub shift: Option<u32>,
    pub swap: Option<u32>,
    pub left_arc: Option<u32>,
    pub right_arc: Option<u32>,
    /// Gold label of the stack top if LEFT_ARC attaches it to its gold head.
    pub left_label: Option<usize>,
    /// Gold label of the stack top if RIGHT_ARC attaches it to its gold head.
    pub right_label: Option<usize>,
}

impl OracleVerdict {
    pub fn cost(&self, t: Transition) -> Option<u32> {
        let labeled = |base: Option<u32>, gold: Option<usize>, l: usize| {
            base.map(|c| match gold {
                Some(g) if g != l => c.saturating_add(1),
                _ => c,
            })
        };
        match t {
            Transition::Shift => self.shift,
            Transition::Swap => self.swap,
            Transition::LeftArc(l) => labeled(self.left_arc, self.left_label, l),
            Transition::RightArc(l) => labeled(self.right_arc, self.right_label, l),
        }
    }

    /// True when the static discipline forces SWAP.
    pub fn swap_forced(&self) -> bool {
        self.swap == Some(0)
    }

    /// Every zero-cost labeled transition given `n_labels` labels.
    pub fn zero_cost_set(&self, n_labels: usize) -> Vec<Transition> {
        let mut out = Vec::new();
        for t in [Transition::Shift, Transition::Swap] {
            if self.cost(t) == Some(0) {
                out.push(t);
            }
        }
        for l in 0..n_labels {
            for t in [Transition::LeftArc(l), Transition::RightArc(l)] {
                if self.cost(t) == Some(0) {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// Static-dynamic oracle for one gold tree.
#[derive(Debug, Clone)]
pub struct Oracle<'g> {
    heads: &'g [usize],
    labels: &'g [usize],
    proj: Vec<usize>,
}

impl<'g> Oracle<'g> {
    /// `heads` and `labels` are indexed by position (index 0 unused).
    pub fn new(heads: &'g [usize], labels: &'g [usize]) -> Self {
        Oracle {
            heads,
            labels,
            proj: projective_order(heads),
        }
    }

    pub fn projective_order(&self) -> &[usize] {
        &self.proj
    }

    /// The stack top must move behind the buffer front.
    pub fn swap_needed(&self, c: &Configuration) -> bool {
        match (c.stack_top(0), c.buffer_front()) {
            (Some(s0), Some(b0)) if s0 != 0 => {
                self.proj[s0] > self.proj[b0] && c.is_legal(Transition::Swap)
            }
            _ => false,
        }
    }

    /// Applies forced swaps until none is needed.
    pub fn settle(&self, c: &mut Configuration) {
        while self.swap_needed(c) {
            c.apply(Transition::Swap).expect("forced swap is legal");
        }
    }

    /// Number of gold arcs that are built or can still be built, assuming
    /// `c` is settled.
    fn reachable_gold_arcs(&self, c: &Configuration) -> u32 {
        let n = c.sentence_len();
        const NOWHERE: usize = usize::MAX;
        let mut stack_pos = vec![NOWHERE; n + 1];
        for (i, &p) in c.stack.iter().enumerate() {
            stack_pos[p] = i;
        }
        let mut in_buffer = vec![false; n + 1];
        let mut min_buffer_rank = usize::MAX;
        for &p in &c.buffer {
            in_buffer[p] = true;
            min_buffer_rank = min_buffer_rank.min(self.proj[p]);
        }
        // an item on the stack will be swapped back if some buffer item
        // precedes it in projective order
        let returns = |p: usize| self.proj[p] > min_buffer_rank;

        let mut count = 0;
        for d in 1..=n {
            let gold = self.heads[d];
            let ok = match c.heads[d] {
                Some(h) => h == gold,
                None if stack_pos[gold] == NOWHERE && !in_buffer[gold] => false,
                None if in_buffer[d] || in_buffer[gold] => true,
                None => {
                    let (sd, sh) = (stack_pos[d], stack_pos[gold]);
                    if sh + 1 == sd {
                        true
                    } else if sh > sd {
                        returns(gold)
                    } else {
                        returns(d)
                    }
                }
            };
            count += ok as u32;
        }
        count
    }

    fn kind_cost(&self, c: &Configuration, base: u32, kind: TransitionKind) -> Option<u32> {
        let t = Transition::of_kind(kind);
        let mut next = c.applied(t).ok()?;
        self.settle(&mut next);
        Some(base - self.reachable_gold_arcs(&next))
    }

    pub fn verdict(&self, c: &Configuration) -> OracleVerdict {
        let s0 = c.stack_top(0);
        let gold_label_if = |head: Option<usize>| match (s0, head) {
            (Some(d), Some(h)) if d != 0 && self.heads[d] == h => Some(self.labels[d]),
            _ => None,
        };
        let left_label = gold_label_if(c.buffer_front());
        let right_label = gold_label_if(c.stack_top(1));

        if self.swap_needed(c) {
            let mut settled = c.clone();
            self.settle(&mut settled);
            let base = self.reachable_gold_arcs(&settled);
            let other = |kind| self.kind_cost(c, base, kind).map(|x| x.max(1));
            return OracleVerdict {
                shift: other(TransitionKind::Shift),
                swap: Some(0),
                left_arc: other(TransitionKind::LeftArc),
                right_arc: other(TransitionKind::RightArc),
                left_label,
                right_label,
            };
        }

        let base = self.reachable_gold_arcs(c);
        OracleVerdict {
            shift: self.kind_cost(c, base, TransitionKind::Shift),
            swap: c.is_legal(Transition::Swap).then_some(INFINITE_COST),
            left_arc: self.kind_cost(c, base, TransitionKind::LeftArc),
            right_arc: self.kind_cost(c, base, TransitionKind::RightArc),
            left_label,
            right_label,
        }
    }

    /// Attachment loss still unavoidable from `c` (unlabeled).
    pub fn minimal_loss(&self, c: &Configuration) -> u32 {
        let mut settled = c.clone();
        self.settle(&mut settled);
        c.sentence_len() as u32 - self.reachable_gold_arcs(&settled)
    }
}

/// Formats one trace line: kind, label, stack size, buffer size.
pub fn trace_line(t: Transition, label: Option<&str>, c: &Configuration) -> String {
    format!(
        "{}\t{}\t{}\t{}",
        t.kind().name(),
        label.unwrap_or("_"),
        c.stack().len(),
        c.buffer().len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legal_kinds(c: &Configuration) -> Vec<TransitionKind> {
        [
            TransitionKind::Shift,
            TransitionKind::Swap,
            TransitionKind::LeftArc,
            TransitionKind::RightArc,
        ]
        .into_iter()
        .filter(|&k| c.is_legal(Transition::of_kind(k)))
        .collect()
    }

    #[test]
    fn initial_configuration() {
        let c = Configuration::initial(1).unwrap();
        assert_eq!(c.stack(), &[0]);
        assert_eq!(c.buffer().iter().copied().collect::<Vec<_>>(), vec![1]);
        let c = Configuration::initial(3).unwrap();
        assert_eq!(c.buffer().iter().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(c.arcs().is_empty());
        assert!(!c.is_terminal());
        assert_eq!(Configuration::initial(0), Err(TransitionError::EmptySentence));
    }

    #[test]
    fn legality() {
        let c = Configuration::initial(3).unwrap();
        assert_eq!(legal_kinds(&c), vec![TransitionKind::Shift]);

        let c = Configuration::from_parts(2, vec![0, 2], vec![], &[(2, 0, 1)]);
        assert_eq!(legal_kinds(&c), vec![TransitionKind::RightArc]);

        let c = Configuration::from_parts(3, vec![0, 2], vec![1, 3], &[]);
        assert!(!c.is_legal(Transition::Swap));
    }

    #[test]
    fn apply_rules() {
        let mut c = Configuration::from_parts(2, vec![0, 1], vec![2], &[]);
        let arc = c.apply(Transition::RightArc(7)).unwrap();
        assert_eq!(arc, Some(Arc { head: 0, label: 7, dependent: 1 }));
        assert_eq!(c.stack(), &[0]);

        let mut c = Configuration::from_parts(2, vec![0], vec![1, 2], &[]);
        c.apply(Transition::Shift).unwrap();
        assert_eq!(c.stack(), &[0, 1]);
        assert_eq!(c.buffer().iter().copied().collect::<Vec<_>>(), vec![2]);

        let mut c = Configuration::from_parts(3, vec![0, 1], vec![2, 3], &[]);
        c.apply(Transition::Swap).unwrap();
        assert_eq!(c.stack(), &[0]);
        assert_eq!(c.buffer().iter().copied().collect::<Vec<_>>(), vec![2, 1, 3]);

        let mut c = Configuration::from_parts(2, vec![0, 1], vec![2], &[]);
        assert_eq!(
            c.apply(Transition::LeftArc(3)).unwrap(),
            Some(Arc { head: 2, label: 3, dependent: 1 })
        );
    }

    #[test]
    fn illegal_apply_names_condition() {
        let mut c = Configuration::initial(2).unwrap();
        let err = c.apply(Transition::LeftArc(0)).unwrap_err();
        assert_eq!(
            err.to_string(),
            "LEFT_ARC(0) is illegal: root cannot be a dependent"
        );
    }

    #[test]
    fn terminal() {
        assert!(Configuration::from_parts(1, vec![0], vec![], &[(0, 0, 1)]).is_terminal());
        assert!(!Configuration::from_parts(1, vec![0, 1], vec![], &[]).is_terminal());
    }

    #[test]
    fn projective_tree_keeps_surface_order() {
        // 1 <- 2 -> 3, 2 <- root
        assert_eq!(projective_order(&[0, 2, 0, 2]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn crossing_tree_order() {
        // 0->2, 2->1, 1->3: arc 1->3 crosses 0->2, in-order visits 1, 3, 2
        assert_eq!(projective_order(&[0, 2, 0, 4, 2]), vec![0, 1, 2, 3, 4]);
        assert_eq!(projective_order(&[0, 2, 0, 1]), vec![0, 1, 3, 2]);
    }

    #[test]
    fn shift_is_free_initially() {
        let heads = [0, 2, 0, 1];
        let labels = [0, 0, 0, 0];
        let oracle = Oracle::new(&heads, &labels);
        let c = Configuration::initial(3).unwrap();
        let v = oracle.verdict(&c);
        assert_eq!(v.shift, Some(0));
        assert_eq!(v.zero_cost_set(1), vec![Transition::Shift]);
    }

    #[test]
    fn right_arc_before_attaching_dependent_loses_it() {
        // gold: 0 -> 1 -> 2; stack [0, 1], buffer [2]
        let heads = [0, 0, 1];
        let labels = [0, 0, 1];
        let oracle = Oracle::new(&heads, &labels);
        let c = Configuration::from_parts(2, vec![0, 1], vec![2], &[]);
        let v = oracle.verdict(&c);
        assert_eq!(v.right_arc, Some(1));
        assert_eq!(v.shift, Some(0));
        assert_eq!(v.swap, Some(INFINITE_COST));
    }

    #[test]
    fn swap_is_forced_when_out_of_order() {
        // 0 -> 2, 2 -> 1, 1 -> 3: projective order 1, 3, 2
        let heads = [0, 2, 0, 1];
        let labels = [0, 1, 0, 2];
        let oracle = Oracle::new(&heads, &labels);
        let c = Configuration::from_parts(3, vec![0, 1, 2], vec![3], &[]);
        let v = oracle.verdict(&c);
        assert!(v.swap_forced());
        assert!(v.shift.unwrap() >= 1);
        assert!(v.right_arc.unwrap() >= 1);
        assert!(v.left_arc.unwrap() >= 1);
    }

    #[test]
    fn wrong_label_costs_one() {
        let heads = [0, 0];
        let labels = [0, 3];
        let oracle = Oracle::new(&heads, &labels);
        let c = Configuration::from_parts(1, vec![0, 1], vec![], &[]);
        let v = oracle.verdict(&c);
        assert_eq!(v.cost(Transition::RightArc(3)), Some(0));
        assert_eq!(v.cost(Transition::RightArc(2)), Some(1));
        assert_eq!(v.zero_cost_set(4), vec![Transition::RightArc(3)]);
    }

    #[test]
    fn trace_format() {
        let c = Configuration::from_parts(2, vec![0, 1], vec![2], &[]);
        assert_eq!(trace_line(Transition::Shift, None, &c), "SHIFT\t_\t2\t1");
    }
}
