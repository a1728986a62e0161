//! Finite filtered probability spaces as event trees.
//!
//! Nodes are stored in a flat vector ordered by time, then by input order,
//! so index 0 is always the root. The atoms of F_t are the time-t nodes.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{fmt_q, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("node {node:?}: probability sum {sum} ≠ 1")]
    ProbabilitySum { node: String, sum: String },
    #[error("node {node:?}: time {time} does not follow parent time {parent_time}")]
    TimeGap { node: String, time: usize, parent_time: usize },
    #[error("node {node:?}: parent {parent:?} does not exist")]
    Orphan { node: String, parent: String },
    #[error("node {node:?}: leaf has zero probability")]
    ZeroProbabilityLeaf { node: String },
    #[error("node {node:?}: branch probability {prob} is negative")]
    NegativeProbability { node: String, prob: String },
    #[error("node {node:?}: duplicate node id")]
    DuplicateId { node: String },
    #[error("tree must have exactly one root at time 0, found {count}")]
    Root { count: usize },
    #[error("node {node:?}: root must have time 0")]
    RootTime { node: String },
    #[error("node {node:?}: non-leaf node at time {time} has no children (horizon {horizon})")]
    EarlyLeaf { node: String, time: usize, horizon: usize },
    #[error("node {node:?}: time {time} exceeds horizon {horizon}")]
    BeyondHorizon { node: String, time: usize, horizon: usize },
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("{0}")]
    Invalid(String),
}

/// Input description of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub time: usize,
    pub parent: Option<String>,
    #[serde(with = "crate::rational::qstr")]
    pub prob: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub nodes: Vec<NodeSpec>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub time: usize,
    pub parent: Option<usize>,
    /// Conditional probability of reaching this node from its parent.
    pub prob: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTree {
    nodes: Vec<Node>,
    horizon: usize,
    children: Vec<Vec<usize>>,
    levels: Vec<Vec<usize>>,
    uprob: Vec<Q>,
    index: HashMap<String, usize>,
    /// Leaf positions (into `levels[horizon]`) below each node, as a contiguous range.
    leaf_span: Vec<(usize, usize)>,
}

/// Value of a stopping time on one leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StopValue {
    At(usize),
    Never,
}

impl StopValue {
    /// True when the time is strictly greater than `t`.
    pub fn after(self, t: usize) -> bool {
        match self {
            StopValue::At(s) => s > t,
            StopValue::Never => true,
        }
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            StopValue::At(s) => Some(s),
            StopValue::Never => None,
        }
    }
}

impl fmt::Display for StopValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopValue::At(t) => write!(f, "{t}"),
            StopValue::Never => f.write_str("inf"),
        }
    }
}

/// A random time given leafwise, indexed like `EventTree::leaves()`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StoppingTime(pub Vec<StopValue>);

impl StoppingTime {
    pub fn constant(tree: &EventTree, v: StopValue) -> Self {
        StoppingTime(vec![v; tree.leaves().len()])
    }

    pub fn get(&self, leaf_pos: usize) -> StopValue {
        self.0[leaf_pos]
    }

    pub fn max(&self, other: &StoppingTime) -> StoppingTime {
        StoppingTime(self.0.iter().zip(&other.0).map(|(a, b)| (*a).max(*b)).collect())
    }

    pub fn min(&self, other: &StoppingTime) -> StoppingTime {
        StoppingTime(self.0.iter().zip(&other.0).map(|(a, b)| (*a).min(*b)).collect())
    }

    pub fn le(&self, other: &StoppingTime) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Measurability on `tree`: whether {τ ≤ t} is a union of time-t atoms
    /// for every t. Returns the offending node otherwise.
    pub fn check_measurable(&self, tree: &EventTree) -> Result<(), usize> {
        for t in 0..=tree.horizon() {
            for &n in tree.level(t) {
                let (lo, hi) = tree.leaf_span(n);
                let first = !self.0[lo].after(t);
                if (lo..hi).any(|p| !self.0[p].after(t) != first) {
                    return Err(n);
                }
            }
        }
        Ok(())
    }

    /// Whether node `n` lies strictly before the time (τ > time(n) below n).
    /// Only meaningful for measurable times.
    pub fn node_before(&self, tree: &EventTree, n: usize) -> bool {
        let (lo, _) = tree.leaf_span(n);
        self.0[lo].after(tree.time(n))
    }

    pub fn render(&self, tree: &EventTree) -> Vec<(String, String)> {
        tree.leaves()
            .iter()
            .zip(&self.0)
            .map(|(&l, v)| (tree.id(l).to_string(), v.to_string()))
            .collect()
    }
}

/// Nonnegative value per node, indexed by node position; constant after the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Process(pub Vec<Q>);

impl Process {
    pub fn constant(tree: &EventTree, c: Q) -> Self {
        Process(vec![c; tree.len()])
    }

    pub fn from_fn(tree: &EventTree, f: impl FnMut(usize) -> Q) -> Self {
        Process((0..tree.len()).map(f).collect())
    }

    pub fn get(&self, n: usize) -> &Q {
        &self.0[n]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|v| !v.is_negative())
    }

    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|v| v.is_positive())
    }

    pub fn mul(&self, other: &Process) -> Process {
        Process(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    /// Zero at a node implies zero at all its descendants.
    pub fn is_absorbing(&self, tree: &EventTree) -> bool {
        (1..tree.len()).all(|n| {
            let p = tree.parent(n).expect("non-root");
            !self.0[p].is_zero() || self.0[n].is_zero()
        })
    }

    /// True at nodes where the value is positive at every node of the path from the root.
    pub fn alive(&self, tree: &EventTree) -> Vec<bool> {
        let mut out = vec![false; tree.len()];
        for n in 0..tree.len() {
            let up = tree.parent(n).is_none_or(|p| out[p]);
            out[n] = up && self.0[n].is_positive();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MartingaleVerdict {
    Holds,
    /// One-step inequality E[Y_child | node] ≤ Y(node) fails.
    Fails { node: usize, forward: Q, current: Q },
}

impl MartingaleVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, MartingaleVerdict::Holds)
    }
}

/// Refined node → original node, with the conditional weight of each copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMap {
    pub orig: Vec<usize>,
    pub weight: Vec<Q>,
}

impl NodeMap {
    pub fn identity(tree: &EventTree) -> Self {
        NodeMap { orig: (0..tree.len()).collect(), weight: vec![Q::one(); tree.len()] }
    }

    /// `self` maps C → B and `inner` maps B → A; the result maps C → A.
    pub fn compose(&self, inner: &NodeMap) -> NodeMap {
        NodeMap {
            orig: self.orig.iter().map(|&b| inner.orig[b]).collect(),
            weight: self.orig.iter().zip(&self.weight).map(|(&b, w)| w * &inner.weight[b]).collect(),
        }
    }

    /// Copies a process on the original tree onto every copy of each node.
    pub fn lift(&self, x: &Process) -> Process {
        Process(self.orig.iter().map(|&o| x.0[o].clone()).collect())
    }

    /// Checks that the map is consistent with the pair of trees.
    pub fn validate(&self, base: &EventTree, refined: &EventTree) -> Result<(), TreeError> {
        if self.orig.len() != refined.len() || self.weight.len() != refined.len() {
            return Err(TreeError::Invalid("node map length differs from refined tree".into()));
        }
        let mut sums = vec![Q::zero(); base.len()];
        for (i, (&o, w)) in self.orig.iter().zip(&self.weight).enumerate() {
            if o >= base.len() || base.time(o) != refined.time(i) || !w.is_positive() {
                return Err(TreeError::Invalid(format!("node map entry for {:?} is inconsistent", refined.id(i))));
            }
            if let (Some(p), Some(po)) = (refined.parent(i), base.parent(o)) {
                if self.orig[p] != po {
                    return Err(TreeError::Invalid(format!("node map breaks ancestry at {:?}", refined.id(i))));
                }
            }
            sums[o] += w;
        }
        if let Some(n) = sums.iter().position(|s| !s.is_one()) {
            return Err(TreeError::Invalid(format!("copy weights of {:?} sum to {}", base.id(n), fmt_q(&sums[n]))));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RefineError {
    #[error("leaf {leaf:?} lies in more than one cell")]
    Overlap { leaf: String },
    #[error("leaf {leaf:?} is not covered by any cell")]
    Uncovered { leaf: String },
    #[error("cell {cell}: reveal time {time} exceeds the horizon")]
    RevealTime { cell: usize, time: usize },
    #[error("cell count {cells} differs from reveal schedule length {reveals}")]
    Schedule { cells: usize, reveals: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum CopyLabel {
    Cell(usize),
    Hidden,
}

impl EventTree {
    /// Validates an instance tree: one root at time 0 (trivial F_0).
    pub fn build(spec: &TreeSpec) -> Result<EventTree, TreeError> {
        Self::build_inner(spec, false)
    }

    /// Refined trees may split the initial atom; time-0 nodes then carry
    /// unconditional probabilities summing to 1.
    fn build_inner(spec: &TreeSpec, split_root: bool) -> Result<EventTree, TreeError> {
        if spec.horizon < 1 {
            return Err(TreeError::Horizon);
        }
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if pos.insert(n.id.as_str(), i).is_some() {
                return Err(TreeError::DuplicateId { node: n.id.clone() });
            }
        }
        let roots: Vec<&NodeSpec> = spec.nodes.iter().filter(|n| n.parent.is_none()).collect();
        if roots.is_empty() || (roots.len() > 1 && !split_root) {
            return Err(TreeError::Root { count: roots.len() });
        }
        if let Some(r) = roots.iter().find(|r| r.time != 0) {
            return Err(TreeError::RootTime { node: r.id.clone() });
        }
        if split_root {
            let sum: Q = roots.iter().map(|r| r.prob.clone()).sum();
            if !sum.is_one() {
                return Err(TreeError::ProbabilitySum { node: "<initial level>".into(), sum: fmt_q(&sum) });
            }
        }
        for n in &spec.nodes {
            if n.time > spec.horizon {
                return Err(TreeError::BeyondHorizon { node: n.id.clone(), time: n.time, horizon: spec.horizon });
            }
            match &n.parent {
                None => {
                    if !split_root && !n.prob.is_one() {
                        return Err(TreeError::Invalid(format!("node {:?}: root probability must be 1", n.id)));
                    }
                }
                Some(p) => {
                    let Some(&pi) = pos.get(p.as_str()) else {
                        return Err(TreeError::Orphan { node: n.id.clone(), parent: p.clone() });
                    };
                    let pt = spec.nodes[pi].time;
                    if n.time != pt + 1 {
                        return Err(TreeError::TimeGap { node: n.id.clone(), time: n.time, parent_time: pt });
                    }
                    if n.prob.is_negative() {
                        return Err(TreeError::NegativeProbability { node: n.id.clone(), prob: fmt_q(&n.prob) });
                    }
                }
            }
        }
        // Times strictly increase along parent links, so there are no cycles and
        // sorting by time puts every parent before its children.
        let mut order: Vec<usize> = (0..spec.nodes.len()).collect();
        order.sort_by_key(|&i| (spec.nodes[i].time, i));
        let mut index = HashMap::new();
        for (new, &old) in order.iter().enumerate() {
            index.insert(spec.nodes[old].id.clone(), new);
        }
        let nodes: Vec<Node> = order
            .iter()
            .map(|&old| {
                let s = &spec.nodes[old];
                Node {
                    id: s.id.clone(),
                    time: s.time,
                    parent: s.parent.as_ref().map(|p| index[p]),
                    prob: s.prob.clone(),
                }
            })
            .collect();
        Self::assemble(nodes, spec.horizon, index)
    }

    fn assemble(nodes: Vec<Node>, horizon: usize, index: HashMap<String, usize>) -> Result<EventTree, TreeError> {
        let len = nodes.len();
        let mut children = vec![Vec::new(); len];
        for (i, n) in nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                children[p].push(i);
            }
        }
        for (i, n) in nodes.iter().enumerate() {
            if children[i].is_empty() {
                if n.time != horizon {
                    return Err(TreeError::EarlyLeaf { node: n.id.clone(), time: n.time, horizon });
                }
            } else {
                let sum: Q = children[i].iter().map(|&c| nodes[c].prob.clone()).sum();
                if !sum.is_one() {
                    return Err(TreeError::ProbabilitySum { node: n.id.clone(), sum: fmt_q(&sum) });
                }
            }
        }
        let mut uprob: Vec<Q> = nodes.iter().map(|n| n.prob.clone()).collect();
        for i in 0..len {
            if let Some(p) = nodes[i].parent {
                uprob[i] = &uprob[p] * &nodes[i].prob;
            }
        }
        if let Some(l) = (0..len).find(|&l| children[l].is_empty() && !uprob[l].is_positive()) {
            return Err(TreeError::ZeroProbabilityLeaf { node: nodes[l].id.clone() });
        }
        // Levels are kept in depth-first order so the leaves below any node are
        // contiguous. Storage order stays "time, then input order".
        let mut dfs_levels = vec![Vec::new(); horizon + 1];
        let mut stack: Vec<usize> = (0..len).filter(|&n| nodes[n].parent.is_none()).rev().collect();
        while let Some(n) = stack.pop() {
            dfs_levels[nodes[n].time].push(n);
            for &c in children[n].iter().rev() {
                stack.push(c);
            }
        }
        let mut leaf_span = vec![(0, 0); len];
        let leaf_pos: HashMap<usize, usize> = dfs_levels[horizon].iter().enumerate().map(|(p, &l)| (l, p)).collect();
        for t in (0..=horizon).rev() {
            for &n in &dfs_levels[t] {
                leaf_span[n] = if t == horizon {
                    (leaf_pos[&n], leaf_pos[&n] + 1)
                } else {
                    let lo = children[n].iter().map(|&c| leaf_span[c].0).min().expect("children");
                    let hi = children[n].iter().map(|&c| leaf_span[c].1).max().expect("children");
                    (lo, hi)
                };
            }
        }
        Ok(EventTree { nodes, horizon, children, levels: dfs_levels, uprob, index, leaf_span })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The root of an instance tree. Refined trees may have several time-0
    /// atoms; index 0 is then the first of them.
    pub fn root(&self) -> usize {
        0
    }

    pub fn has_single_root(&self) -> bool {
        self.levels[0].len() == 1
    }

    pub fn node(&self, n: usize) -> &Node {
        &self.nodes[n]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn id(&self, n: usize) -> &str {
        &self.nodes[n].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn time(&self, n: usize) -> usize {
        self.nodes[n].time
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        self.nodes[n].parent
    }

    pub fn prob(&self, n: usize) -> &Q {
        &self.nodes[n].prob
    }

    /// Unconditional probability of the atom.
    pub fn uprob(&self, n: usize) -> &Q {
        &self.uprob[n]
    }

    pub fn children(&self, n: usize) -> &[usize] {
        &self.children[n]
    }

    /// Time-t nodes, in depth-first order.
    pub fn level(&self, t: usize) -> &[usize] {
        &self.levels[t]
    }

    pub fn leaves(&self) -> &[usize] {
        &self.levels[self.horizon]
    }

    /// Range of leaf positions (into `leaves()`) below `n`.
    pub fn leaf_span(&self, n: usize) -> (usize, usize) {
        self.leaf_span[n]
    }

    pub fn leaves_under(&self, n: usize) -> &[usize] {
        let (lo, hi) = self.leaf_span[n];
        &self.leaves()[lo..hi]
    }

    /// Position of a leaf within `leaves()`.
    pub fn leaf_pos(&self, leaf: usize) -> usize {
        self.leaf_span[leaf].0
    }

    /// Ancestor of `n` at time `t ≤ time(n)`.
    pub fn ancestor_at(&self, mut n: usize, t: usize) -> usize {
        assert!(t <= self.time(n));
        while self.time(n) > t {
            n = self.parent(n).expect("non-root");
        }
        n
    }

    /// Nodes from the root down to `n`, indexed by time.
    pub fn path(&self, n: usize) -> Vec<usize> {
        let mut out = vec![n];
        let mut cur = n;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    /// `n` and all its descendants, parents before children.
    pub fn subtree(&self, n: usize) -> Vec<usize> {
        let mut out = vec![n];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out
    }

    pub fn is_ancestor(&self, a: usize, n: usize) -> bool {
        self.time(a) <= self.time(n) && self.ancestor_at(n, self.time(a)) == a
    }

    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSpec {
                    id: n.id.clone(),
                    time: n.time,
                    parent: n.parent.map(|p| self.nodes[p].id.clone()),
                    prob: n.prob.clone(),
                })
                .collect(),
            horizon: self.horizon,
        }
    }

    /// E[X_t | F_s] where `values[i]` is the value at `level(t)[i]`;
    /// the result is indexed like `level(s)`.
    pub fn conditional_expectation(&self, t: usize, values: &[Q], s: usize) -> Result<Vec<Q>, TreeError> {
        if s > t {
            return Err(TreeError::Invalid(format!("conditioning time {s} exceeds value time {t}")));
        }
        if t > self.horizon {
            return Err(TreeError::Invalid(format!("time {t} exceeds horizon {}", self.horizon)));
        }
        if values.len() != self.level(t).len() {
            return Err(TreeError::Invalid(format!(
                "expected {} values at time {t}, got {}",
                self.level(t).len(),
                values.len()
            )));
        }
        let mut acc: HashMap<usize, Q> = HashMap::new();
        for (&n, v) in self.level(t).iter().zip(values) {
            let a = self.ancestor_at(n, s);
            *acc.entry(a).or_insert_with(Q::zero) += v * &self.uprob[n];
        }
        Ok(self.level(s).iter().map(|&a| &acc[&a] / &self.uprob[a]).collect())
    }

    /// Σ_c p(c|n)·Y(c) at a non-leaf node.
    pub fn forward(&self, y: &Process, n: usize) -> Q {
        self.children[n].iter().map(|&c| &self.nodes[c].prob * &y.0[c]).sum()
    }

    /// One-step supermartingale test; the first violating node in storage order is reported.
    pub fn is_supermartingale(&self, y: &Process) -> MartingaleVerdict {
        for n in 0..self.len() {
            if self.children[n].is_empty() {
                continue;
            }
            let forward = self.forward(y, n);
            if forward > y.0[n] {
                return MartingaleVerdict::Fails { node: n, forward, current: y.0[n].clone() };
            }
        }
        MartingaleVerdict::Holds
    }

    /// First time the path value is zero; `Never` if it stays positive through the horizon.
    pub fn hitting_time(&self, x: &Process) -> StoppingTime {
        StoppingTime(
            self.leaves()
                .iter()
                .map(|&l| {
                    self.path(l)
                        .iter()
                        .position(|&n| x.0[n].is_zero())
                        .map_or(StopValue::Never, StopValue::At)
                })
                .collect(),
        )
    }

    /// Enlarges the filtration: from `reveal[k]` on, every atom is intersected
    /// with cell `k` (a set of leaves). Copies with probability zero are dropped.
    pub fn refine_by_partition(
        &self,
        cells: &[Vec<usize>],
        reveal: &[usize],
    ) -> Result<(EventTree, NodeMap), RefineError> {
        if cells.len() != reveal.len() {
            return Err(RefineError::Schedule { cells: cells.len(), reveals: reveal.len() });
        }
        let mut cell_of = vec![usize::MAX; self.len()];
        for (k, cell) in cells.iter().enumerate() {
            if reveal[k] > self.horizon {
                return Err(RefineError::RevealTime { cell: k, time: reveal[k] });
            }
            for &l in cell {
                if cell_of[l] != usize::MAX {
                    return Err(RefineError::Overlap { leaf: self.id(l).to_string() });
                }
                cell_of[l] = k;
            }
        }
        if let Some(&l) = self.leaves().iter().find(|&&l| cell_of[l] == usize::MAX) {
            return Err(RefineError::Uncovered { leaf: self.id(l).to_string() });
        }
        let label_at = |k: usize, t: usize| if reveal[k] <= t { CopyLabel::Cell(k) } else { CopyLabel::Hidden };

        // For every node: the labels of its copies and the probability mass of each.
        let mut copies: Vec<Vec<(CopyLabel, Q)>> = Vec::with_capacity(self.len());
        for n in 0..self.len() {
            let t = self.time(n);
            let mut mass: Vec<(CopyLabel, Q)> = Vec::new();
            for &l in self.leaves_under(n) {
                let lab = label_at(cell_of[l], t);
                match mass.iter_mut().find(|(x, _)| *x == lab) {
                    Some((_, m)) => *m += &self.uprob[l],
                    None => mass.push((lab, self.uprob[l].clone())),
                }
            }
            mass.sort_by_key(|a| a.0);
            copies.push(mass);
        }

        let mut specs = Vec::new();
        let mut copy_id: HashMap<(usize, CopyLabel), String> = HashMap::new();
        let mut taken: std::collections::HashSet<String> = self.nodes.iter().map(|n| n.id.clone()).collect();
        for n in 0..self.len() {
            let single = copies[n].len() == 1;
            for (lab, m) in &copies[n] {
                let id = if single {
                    self.id(n).to_string()
                } else {
                    let base = match lab {
                        CopyLabel::Cell(k) => format!("{}#{}", self.id(n), k),
                        CopyLabel::Hidden => format!("{}#u", self.id(n)),
                    };
                    let mut id = base.clone();
                    while taken.contains(&id) {
                        id.push('#');
                    }
                    id
                };
                taken.insert(id.clone());
                let (parent, prob) = match self.parent(n) {
                    None => (None, m.clone()),
                    Some(p) => {
                        let plab = match lab {
                            CopyLabel::Cell(k) => label_at(*k, self.time(p)),
                            CopyLabel::Hidden => CopyLabel::Hidden,
                        };
                        let pm = &copies[p].iter().find(|(x, _)| *x == plab).expect("parent copy").1;
                        (Some(copy_id[&(p, plab)].clone()), m / pm)
                    }
                };
                specs.push(NodeSpec { id: id.clone(), time: self.time(n), parent, prob });
                copy_id.insert((n, *lab), id);
            }
        }
        let refined = EventTree::build_inner(&TreeSpec { nodes: specs, horizon: self.horizon }, true)?;
        let mut map = NodeMap { orig: vec![0; refined.len()], weight: vec![Q::zero(); refined.len()] };
        for ((n, lab), id) in &copy_id {
            let r = refined.index_of(id).expect("copy id present");
            map.orig[r] = *n;
            map.weight[r] = copies[*n].iter().find(|(x, _)| x == lab).expect("copy").1.clone() / &self.uprob[*n];
        }
        Ok((refined, map))
    }

    /// Weighted average over the copies of each original node.
    pub fn optional_projection(&self, map: &NodeMap, refined: &EventTree, yplus: &Process) -> Result<Process, TreeError> {
        map.validate(self, refined)?;
        if yplus.0.len() != refined.len() {
            return Err(TreeError::Invalid("refined process length differs from refined tree".into()));
        }
        let mut out = vec![Q::zero(); self.len()];
        for (i, (&o, w)) in map.orig.iter().zip(&map.weight).enumerate() {
            out[o] += w * &yplus.0[i];
        }
        Ok(Process(out))
    }

    /// Number of events in the σ-algebra generated by the time-t atoms.
    pub fn sigma_algebra_size(&self, t: usize) -> num_bigint::BigUint {
        num_bigint::BigUint::from(2u32).pow(self.level(t).len() as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    pub(crate) fn spec(nodes: &[(&str, usize, Option<&str>, Q)], horizon: usize) -> TreeSpec {
        TreeSpec {
            nodes: nodes
                .iter()
                .map(|(id, t, p, pr)| NodeSpec {
                    id: id.to_string(),
                    time: *t,
                    parent: p.map(|s| s.to_string()),
                    prob: pr.clone(),
                })
                .collect(),
            horizon,
        }
    }

    fn timeline(len: usize) -> EventTree {
        let ids: Vec<String> = (0..len).map(|t| format!("t{t}")).collect();
        let nodes: Vec<(&str, usize, Option<&str>, Q)> = (0..len)
            .map(|t| (ids[t].as_str(), t, if t == 0 { None } else { Some(ids[t - 1].as_str()) }, qi(1)))
            .collect();
        EventTree::build(&spec(&nodes, len - 1)).unwrap()
    }

    fn binomial() -> EventTree {
        EventTree::build(&spec(
            &[("r", 0, None, qi(1)), ("u", 1, Some("r"), q(1, 2)), ("d", 1, Some("r"), q(1, 2))],
            1,
        ))
        .unwrap()
    }

    #[test]
    fn builds_timeline_and_binomial() {
        let t = timeline(3);
        assert_eq!(t.len(), 3);
        assert_eq!(t.leaves().len(), 1);
        let b = binomial();
        assert_eq!(b.len(), 3);
        assert_eq!(b.leaves().len(), 2);
        assert_eq!(b.uprob(b.index_of("u").unwrap()), &q(1, 2));
    }

    #[test]
    fn probability_sum_error_names_node() {
        let err = EventTree::build(&spec(
            &[("r", 0, None, qi(1)), ("u", 1, Some("r"), q(1, 3)), ("d", 1, Some("r"), q(1, 3))],
            1,
        ))
        .unwrap_err();
        assert_eq!(err.to_string(), "node \"r\": probability sum 2/3 ≠ 1");
    }

    #[test]
    fn structural_errors() {
        let gap = EventTree::build(&spec(&[("r", 0, None, qi(1)), ("x", 2, Some("r"), qi(1))], 2)).unwrap_err();
        assert!(matches!(gap, TreeError::TimeGap { .. }));
        let orphan = EventTree::build(&spec(&[("r", 0, None, qi(1)), ("x", 1, Some("zz"), qi(1))], 1)).unwrap_err();
        assert!(matches!(orphan, TreeError::Orphan { .. }));
        let zero = EventTree::build(&spec(
            &[("r", 0, None, qi(1)), ("u", 1, Some("r"), qi(1)), ("d", 1, Some("r"), qi(0))],
            1,
        ))
        .unwrap_err();
        assert_eq!(zero, TreeError::ZeroProbabilityLeaf { node: "d".into() });
        let early = EventTree::build(&spec(&[("r", 0, None, qi(1)), ("u", 1, Some("r"), qi(1))], 2)).unwrap_err();
        assert!(matches!(early, TreeError::EarlyLeaf { .. }));
        let dup = EventTree::build(&spec(&[("r", 0, None, qi(1)), ("r", 1, Some("r"), qi(1))], 1)).unwrap_err();
        assert!(matches!(dup, TreeError::DuplicateId { .. }));
    }

    #[test]
    fn conditional_expectation_examples() {
        let b = binomial();
        assert_eq!(b.conditional_expectation(1, &[qi(6), qi(2)], 0).unwrap(), vec![qi(4)]);
        let t = EventTree::build(&spec(
            &[("r", 0, None, qi(1)), ("m", 1, Some("r"), qi(1)), ("a", 2, Some("m"), q(1, 2)), ("b", 2, Some("m"), q(1, 2))],
            2,
        ))
        .unwrap();
        assert_eq!(t.conditional_expectation(2, &[qi(9), qi(1)], 0).unwrap(), vec![qi(5)]);
        assert_eq!(t.conditional_expectation(2, &[qi(7), qi(7)], 1).unwrap(), vec![qi(7)]);
        assert!(t.conditional_expectation(1, &[qi(1)], 2).is_err());
        assert!(t.conditional_expectation(2, &[qi(1)], 0).is_err());
    }

    #[test]
    fn supermartingale_examples() {
        let t = timeline(3);
        let p = |v: [i64; 3]| Process(v.iter().map(|&x| qi(x)).collect());
        assert!(t.is_supermartingale(&Process::constant(&t, qi(1))).holds());
        match t.is_supermartingale(&p([5, 4, 5])) {
            MartingaleVerdict::Fails { node, forward, current } => {
                assert_eq!(t.time(node), 1);
                assert_eq!((forward, current), (qi(5), qi(4)));
            }
            v => panic!("{v:?}"),
        }
        assert!(t.is_supermartingale(&p([5, 5, 4])).holds());
    }

    #[test]
    fn hitting_time_examples() {
        let t = timeline(3);
        let p = |v: [i64; 3]| Process(v.iter().map(|&x| qi(x)).collect());
        assert_eq!(t.hitting_time(&p([1, 1, 0])).0, vec![StopValue::At(2)]);
        assert_eq!(t.hitting_time(&p([1, 2, 3])).0, vec![StopValue::Never]);
        assert_eq!(t.hitting_time(&p([1, 0, 1])).0, vec![StopValue::At(1)]);
    }

    #[test]
    fn trivial_refinement_is_identity() {
        let b = binomial();
        let (r, m) = b.refine_by_partition(&[b.leaves().to_vec()], &[0]).unwrap();
        assert_eq!(r, b);
        assert_eq!(m, NodeMap::identity(&b));
    }

    #[test]
    fn refinement_by_leaf_splits_root() {
        let b = binomial();
        let cells: Vec<Vec<usize>> = b.leaves().iter().map(|&l| vec![l]).collect();
        let (r, m) = b.refine_by_partition(&cells, &[0, 0]).unwrap();
        assert_eq!(r.level(0).len(), 2);
        assert_eq!(r.len(), 4);
        let roots: Vec<usize> = r.level(0).to_vec();
        for &c in &roots {
            assert_eq!(m.orig[c], 0);
            assert_eq!(m.weight[c], q(1, 2));
        }
        m.validate(&b, &r).unwrap();
    }

    #[test]
    fn refinement_sigma_algebra_size() {
        let t = EventTree::build(&spec(
            &[("r", 0, None, qi(1)), ("m", 1, Some("r"), qi(1)), ("a", 2, Some("m"), q(1, 2)), ("b", 2, Some("m"), q(1, 2))],
            2,
        ))
        .unwrap();
        let a = t.index_of("a").unwrap();
        let bb = t.index_of("b").unwrap();
        assert_eq!(t.sigma_algebra_size(1), 2u32.into());
        let (r, _) = t.refine_by_partition(&[vec![a], vec![bb]], &[1, 1]).unwrap();
        assert_eq!(r.sigma_algebra_size(1), 4u32.into());
        assert_eq!(r.sigma_algebra_size(0), 2u32.into());
    }

    #[test]
    fn refinement_rejects_overlap() {
        let b = binomial();
        let u = b.index_of("u").unwrap();
        let err = b.refine_by_partition(&[vec![u], b.leaves().to_vec()], &[0, 0]).unwrap_err();
        assert!(matches!(err, RefineError::Overlap { .. }));
    }

    #[test]
    fn projection_examples() {
        let b = binomial();
        let y = Process(vec![qi(3), qi(1), qi(2)]);
        assert_eq!(b.optional_projection(&NodeMap::identity(&b), &b, &y).unwrap(), y);
        let cells: Vec<Vec<usize>> = b.leaves().iter().map(|&l| vec![l]).collect();
        let (r, m) = b.refine_by_partition(&cells, &[0, 0]).unwrap();
        let mut v = Process::constant(&r, qi(0));
        let roots = r.level(0).to_vec();
        v.0[roots[0]] = qi(2);
        v.0[roots[1]] = qi(4);
        assert_eq!(b.optional_projection(&m, &r, &v).unwrap().0[0], qi(3));
    }

    #[test]
    fn stopping_time_measurability() {
        let b = binomial();
        let ok = StoppingTime(vec![StopValue::At(1), StopValue::Never]);
        assert!(ok.check_measurable(&b).is_ok());
        let bad = StoppingTime(vec![StopValue::At(0), StopValue::At(1)]);
        assert_eq!(bad.check_measurable(&b), Err(0));
    }
}
